//! Array geometry, hemisphere coordinates and the closed-form TDOA solution.
//!
//! Coordinate convention used throughout the crate: microphone 1 sits at the
//! origin, microphone 2 on the +x axis and microphone 3 in the xy-plane. Azimuth
//! `theta` is measured from +x toward +y, elevation `phi` from the array plane
//! toward +z, so a direction maps to
//! `(cos(phi) cos(theta), cos(phi) sin(theta), sin(phi))`.

use core::f64::consts::{FRAC_PI_2, PI};

use crate::math::{self, atan2, cos, sin, sqrt, Vec3};

/// Relative slack allowed on `|(s_x, s_y)|` before a closed-form solution is
/// reported as inconsistent.
const CF_INCONSISTENCY_SLACK: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("microphone 2 offset b must be positive and finite, got {0}")]
    InvalidBaseline(f64),
    #[error("microphone 3 must lie off the x axis (c_y != 0), got c_x={c_x}, c_y={c_y}")]
    CollinearArray { c_x: f64, c_y: f64 },
    #[error("elevation {0} rad outside [0, pi/2]")]
    ElevationOutOfRange(f64),
    #[error("azimuth {0} is not finite")]
    NonFiniteAzimuth(f64),
    #[error("point ({x}, {y}, {z}) is not on the upper unit hemisphere")]
    NotOnHemisphere { x: f64, y: f64, z: f64 },
    #[error("far-field radius {radius} m must be at least {min} m for this array")]
    RadiusTooSmall { radius: f64, min: f64 },
}

/// One of the three microphone pairs, in the canonical order `(1,2), (1,3), (2,3)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Pair {
    P12,
    P13,
    P23,
}

impl Pair {
    pub const ALL: [Pair; 3] = [Pair::P12, Pair::P13, Pair::P23];

    /// Zero-based microphone indices `(i, j)`.
    pub const fn mics(self) -> (usize, usize) {
        match self {
            Pair::P12 => (0, 1),
            Pair::P13 => (0, 2),
            Pair::P23 => (1, 2),
        }
    }

    pub const fn index(self) -> usize {
        match self {
            Pair::P12 => 0,
            Pair::P13 => 1,
            Pair::P23 => 2,
        }
    }
}

/// Canonical placement of the three microphones:
/// `m1 = (0,0,0)`, `m2 = (b,0,0)`, `m3 = (c_x,c_y,0)`, all in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ArrayGeometry {
    b: f64,
    c_x: f64,
    c_y: f64,
}

impl ArrayGeometry {
    pub fn new(b: f64, c_x: f64, c_y: f64) -> Result<Self, GeometryError> {
        if !(b.is_finite() && b > 0.0) {
            return Err(GeometryError::InvalidBaseline(b));
        }
        if !(c_x.is_finite() && c_y.is_finite()) || c_y == 0.0 {
            return Err(GeometryError::CollinearArray { c_x, c_y });
        }
        Ok(Self { b, c_x, c_y })
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn c_x(&self) -> f64 {
        self.c_x
    }

    pub fn c_y(&self) -> f64 {
        self.c_y
    }

    pub fn mics(&self) -> [Vec3; 3] {
        [[0.0; 3], [self.b, 0.0, 0.0], [self.c_x, self.c_y, 0.0]]
    }

    /// Inter-microphone distance of `pair` in meters.
    pub fn pair_distance(&self, pair: Pair) -> f64 {
        let m = self.mics();
        let (i, j) = pair.mics();
        math::norm(math::sub(m[i], m[j]))
    }

    pub fn max_spacing(&self) -> f64 {
        Pair::ALL
            .iter()
            .map(|&p| self.pair_distance(p))
            .fold(0.0, f64::max)
    }
}

/// A 2D direction of arrival: azimuth in `[-pi, pi]`, elevation in `[0, pi/2]`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Direction {
    pub theta: f64,
    pub phi: f64,
}

impl Direction {
    /// Builds a direction, wrapping `theta` into `[-pi, pi)`.
    ///
    /// Elevations within `1e-12` of the valid range are clamped onto it.
    pub fn new(theta: f64, phi: f64) -> Result<Self, GeometryError> {
        if !theta.is_finite() {
            return Err(GeometryError::NonFiniteAzimuth(theta));
        }
        let phi = if (-1e-12..0.0).contains(&phi) {
            0.0
        } else if phi > FRAC_PI_2 && phi <= FRAC_PI_2 + 1e-12 {
            FRAC_PI_2
        } else {
            phi
        };
        if !(0.0..=FRAC_PI_2).contains(&phi) {
            return Err(GeometryError::ElevationOutOfRange(phi));
        }
        Ok(Self {
            theta: math::wrap_pi(theta),
            phi,
        })
    }

    pub fn from_degrees(theta_deg: f64, phi_deg: f64) -> Result<Self, GeometryError> {
        Self::new(theta_deg.to_radians(), phi_deg.to_radians())
    }

    pub fn to_point(self) -> HemispherePoint {
        direction_to_point(self)
    }

    /// Great-circle angle to `other`, in radians.
    pub fn angle_to(self, other: Direction) -> f64 {
        self.to_point().angle_to(&other.to_point())
    }
}

/// A point on the upper unit hemisphere.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HemispherePoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl HemispherePoint {
    /// Normalizes `(x, y, z)` onto the unit sphere and rejects points below the
    /// array plane (beyond a `1e-9` tolerance, which is snapped to `z = 0`).
    pub fn from_xyz(x: f64, y: f64, z: f64) -> Result<Self, GeometryError> {
        let n = sqrt(x * x + y * y + z * z);
        if !n.is_finite() || n == 0.0 || z / n < -1e-9 {
            return Err(GeometryError::NotOnHemisphere { x, y, z });
        }
        Ok(Self {
            x: x / n,
            y: y / n,
            z: (z / n).max(0.0),
        })
    }

    pub fn as_array(&self) -> Vec3 {
        [self.x, self.y, self.z]
    }

    pub fn to_direction(self) -> Direction {
        point_to_direction(self)
    }

    /// Euclidean (chord) distance to `other`.
    pub fn chord(&self, other: &HemispherePoint) -> f64 {
        sqrt(math::sq_dist(self.as_array(), other.as_array()))
    }

    /// Great-circle angle to `other`, in radians.
    pub fn angle_to(&self, other: &HemispherePoint) -> f64 {
        // 2 asin(chord / 2) stays accurate for nearly coincident points.
        2.0 * libm::asin((self.chord(other) / 2.0).min(1.0))
    }
}

pub fn direction_to_point(d: Direction) -> HemispherePoint {
    let (cp, sp) = (cos(d.phi), sin(d.phi));
    HemispherePoint {
        x: cp * cos(d.theta),
        y: cp * sin(d.theta),
        z: sp,
    }
}

/// Inverse of [`direction_to_point`]; the azimuth at the pole is defined as 0.
pub fn point_to_direction(p: HemispherePoint) -> Direction {
    let rho = sqrt(p.x * p.x + p.y * p.y);
    let theta = if rho < 1e-12 { 0.0 } else { atan2(p.y, p.x) };
    let phi = atan2(p.z.max(0.0), rho);
    Direction {
        theta: if theta >= PI { -PI } else { theta },
        phi: phi.min(FRAC_PI_2),
    }
}

/// A TDOA triple `[r12, r13, r23]` in meters, `r_ij = |s - m_i| - |s - m_j|`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TdoaTriple {
    pub r12: f64,
    pub r13: f64,
    pub r23: f64,
}

impl TdoaTriple {
    pub const fn new(r12: f64, r13: f64, r23: f64) -> Self {
        Self { r12, r13, r23 }
    }

    pub const fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub const fn as_array(&self) -> [f64; 3] {
        [self.r12, self.r13, self.r23]
    }

    pub fn get(&self, pair: Pair) -> f64 {
        self.as_array()[pair.index()]
    }

    /// `r12 + r23 - r13`, zero for any geometrically consistent triple.
    pub fn closure_residual(&self) -> f64 {
        self.r12 + self.r23 - self.r13
    }

    pub fn sq_dist(&self, other: &TdoaTriple) -> f64 {
        math::sq_dist(self.as_array(), other.as_array())
    }
}

/// Radius at which far-field sources are placed when converting between
/// directions and TDOAs.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FarFieldRadius(f64);

impl FarFieldRadius {
    pub const DEFAULT_METERS: f64 = 100.0;

    /// Validates `r >= 100 * d12` for the given array.
    pub fn new(r: f64, g: &ArrayGeometry) -> Result<Self, GeometryError> {
        let min = 100.0 * g.pair_distance(Pair::P12);
        if !(r.is_finite() && r >= min) {
            return Err(GeometryError::RadiusTooSmall { radius: r, min });
        }
        Ok(Self(r))
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl Default for FarFieldRadius {
    fn default() -> Self {
        Self(Self::DEFAULT_METERS)
    }
}

/// Direct-path TDOAs of a source at `source` (meters, array frame).
pub fn tdoa_from_geometry(g: &ArrayGeometry, source: Vec3) -> TdoaTriple {
    let m = g.mics();
    let d = [
        math::norm(math::sub(source, m[0])),
        math::norm(math::sub(source, m[1])),
        math::norm(math::sub(source, m[2])),
    ];
    TdoaTriple::new(d[0] - d[1], d[0] - d[2], d[1] - d[2])
}

/// TDOAs of a source in direction `d` at distance `range` meters.
pub fn tdoa_for_direction(g: &ArrayGeometry, d: Direction, range: f64) -> TdoaTriple {
    let p = direction_to_point(d);
    tdoa_from_geometry(g, [p.x * range, p.y * range, p.z * range])
}

/// Output of [`cf_map`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CfSolution {
    pub point: HemispherePoint,
    /// The elevation radicand was negative and clamped to zero.
    pub clamped: bool,
    /// `|(s_x, s_y)|` exceeded the radius by more than 5 %.
    pub inconsistent: bool,
}

/// Closed-form mapping from `(r12, r13)` to a source on the far-field sphere,
/// normalized to the unit hemisphere (`s_z >= 0`).
pub fn cf_map(r12: f64, r13: f64, g: &ArrayGeometry, r: FarFieldRadius) -> CfSolution {
    let r = r.get();
    let (b, c_x, c_y) = (g.b, g.c_x, g.c_y);
    let s_x = (b * b + 2.0 * r12 * r - r12 * r12) / (2.0 * b);
    let s_y = (c_x * c_x + c_y * c_y - r13 * r13 + 2.0 * r13 * r - 2.0 * c_x * s_x) / (2.0 * c_y);
    let planar = sqrt(s_x * s_x + s_y * s_y);
    let radicand = r * r - s_x * s_x - s_y * s_y;
    let inconsistent = planar > r * (1.0 + CF_INCONSISTENCY_SLACK);
    if radicand < 0.0 {
        return CfSolution {
            point: HemispherePoint {
                x: s_x / planar,
                y: s_y / planar,
                z: 0.0,
            },
            clamped: true,
            inconsistent,
        };
    }
    let s_z = sqrt(radicand);
    let n = sqrt(s_x * s_x + s_y * s_y + s_z * s_z);
    CfSolution {
        point: HemispherePoint {
            x: s_x / n,
            y: s_y / n,
            z: s_z / n,
        },
        clamped: false,
        inconsistent,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn g_square() -> ArrayGeometry {
        ArrayGeometry::new(0.1, 0.0, 0.1).unwrap()
    }

    fn g_pixel() -> ArrayGeometry {
        ArrayGeometry::new(0.1, 0.05, 0.12).unwrap()
    }

    #[test]
    fn rejects_degenerate_arrays() {
        assert!(matches!(
            ArrayGeometry::new(0.0, 0.05, 0.1),
            Err(GeometryError::InvalidBaseline(_))
        ));
        assert!(matches!(
            ArrayGeometry::new(0.1, 0.05, 0.0),
            Err(GeometryError::CollinearArray { .. })
        ));
        let g = g_pixel();
        for p in Pair::ALL {
            assert!(g.pair_distance(p) > 0.0);
        }
    }

    #[test]
    fn direction_axis_and_pole() {
        let p = direction_to_point(Direction::new(0.0, 0.0).unwrap());
        assert_eq!(p.as_array(), [1.0, 0.0, 0.0]);
        let p = direction_to_point(Direction::new(FRAC_PI_2, FRAC_PI_2).unwrap());
        assert_abs_diff_eq!(p.x, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.y, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.z, 1.0, epsilon = 1e-15);
        // azimuth is undefined at the pole and reported as 0
        let d = point_to_direction(HemispherePoint {
            x: 0.0,
            y: 0.0,
            z: 1.0,
        });
        assert_eq!(d.theta, 0.0);
        assert_eq!(d.phi, FRAC_PI_2);
    }

    #[test]
    fn direction_3_4_5_triangle() {
        let d = Direction::new(0.6435, 0.9273).unwrap();
        let p = d.to_point();
        assert_abs_diff_eq!(p.x, 0.48, epsilon = 1e-4);
        assert_abs_diff_eq!(p.y, 0.36, epsilon = 1e-4);
        assert_abs_diff_eq!(p.z, 0.8, epsilon = 1e-4);
        let back = p.to_direction();
        assert_abs_diff_eq!(back.theta, d.theta, epsilon = 1e-12);
        assert_abs_diff_eq!(back.phi, d.phi, epsilon = 1e-12);
    }

    #[test]
    fn theta_wraps() {
        let d = Direction::new(3.0 * PI / 2.0, 0.1).unwrap();
        assert_abs_diff_eq!(d.theta, -FRAC_PI_2, epsilon = 1e-15);
        assert!(Direction::new(0.0, 1.6).is_err());
        assert!(Direction::new(0.0, -0.1).is_err());
    }

    #[test]
    fn hemisphere_point_rejects_lower_half() {
        assert!(HemispherePoint::from_xyz(0.0, 0.0, -1.0).is_err());
        assert!(HemispherePoint::from_xyz(0.0, 0.0, 0.0).is_err());
        let p = HemispherePoint::from_xyz(3.0, 0.0, 4.0).unwrap();
        assert_abs_diff_eq!(p.x, 0.6, epsilon = 1e-15);
    }

    #[test]
    fn tdoa_colinear_source() {
        let q = tdoa_from_geometry(&g_square(), [0.6, 0.0, 0.0]);
        assert_abs_diff_eq!(q.r12, 0.1, epsilon = 1e-15);
    }

    #[test]
    fn tdoa_far_source_along_y() {
        // |s| - |s - m3| with s = (0, 100, 0), m3 = (0.05, 0.12, 0)
        let q = tdoa_from_geometry(&g_pixel(), [0.0, 100.0, 0.0]);
        let expected = 100.0 - (0.05f64 * 0.05 + 99.88 * 99.88).sqrt();
        assert_abs_diff_eq!(q.r13, expected, epsilon = 1e-13);
        assert_abs_diff_eq!(q.r13, 0.1199875, epsilon = 1e-7);
    }

    #[test]
    fn tdoa_symmetric_overhead_source() {
        let g = ArrayGeometry::new(0.1, 0.05, 0.08).unwrap();
        let q = tdoa_from_geometry(&g, [0.05, 0.0, 3.0]);
        assert_abs_diff_eq!(q.r12, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn cf_on_axis() {
        let g = g_square();
        let r = FarFieldRadius::default();
        let q = tdoa_from_geometry(&g, [100.0, 0.0, 0.0]);
        let sol = cf_map(q.r12, q.r13, &g, r);
        let d = sol.point.to_direction();
        assert_abs_diff_eq!(d.theta, 0.0, epsilon = 1e-6);
        assert_abs_diff_eq!(d.phi, 0.0, epsilon = 1e-4);
    }

    #[test]
    fn cf_round_trip_37_25() {
        let g = g_pixel();
        let r = FarFieldRadius::default();
        let d = Direction::from_degrees(37.0, 25.0).unwrap();
        let q = tdoa_for_direction(&g, d, r.get());
        let sol = cf_map(q.r12, q.r13, &g, r);
        assert!(!sol.clamped && !sol.inconsistent);
        let e = sol.point.to_direction();
        assert_abs_diff_eq!(e.theta, d.theta, epsilon = 1e-6);
        assert_abs_diff_eq!(e.phi, d.phi, epsilon = 1e-6);
    }

    #[test]
    fn cf_flags_inflated_tdoas() {
        let g = g_square();
        let r = FarFieldRadius::default();
        let q = tdoa_from_geometry(&g, [100.0, 0.0, 0.0]);
        let sol = cf_map(q.r12 * 1.2, q.r13 * 1.2, &g, r);
        assert!(sol.clamped);
        assert!(sol.inconsistent);
        assert_eq!(sol.point.z, 0.0);
        let n = sol.point.x.hypot(sol.point.y);
        assert_abs_diff_eq!(n, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn far_field_radius_bound() {
        let g = g_pixel();
        assert!(FarFieldRadius::new(9.9, &g).is_err());
        assert!(FarFieldRadius::new(10.0, &g).is_ok());
    }

    proptest! {
        #[test]
        fn direction_round_trip(theta in -PI..PI, phi in 0.0..core::f64::consts::FRAC_PI_2 - 1e-4) {
            let d = Direction::new(theta, phi).unwrap();
            let p = d.to_point();
            prop_assert!((p.x * p.x + p.y * p.y + p.z * p.z - 1.0).abs() < 1e-12);
            let back = p.to_direction();
            prop_assert!((back.phi - d.phi).abs() < 1e-12);
            let dtheta = crate::math::wrap_pi(back.theta - d.theta);
            prop_assert!(dtheta.abs() < 1e-12);
        }

        #[test]
        fn geometric_tdoas_close_and_are_bounded(
            b in 0.02..0.3f64, c_x in -0.2..0.3f64, c_y in 0.02..0.3f64,
            sx in -5.0..5.0f64, sy in -5.0..5.0f64, sz in 0.0..5.0f64,
        ) {
            let g = ArrayGeometry::new(b, c_x, c_y).unwrap();
            let q = tdoa_from_geometry(&g, [sx, sy, sz]);
            prop_assert!(q.closure_residual().abs() < 1e-14);
            for p in Pair::ALL {
                prop_assert!(q.get(p).abs() <= g.pair_distance(p) + 1e-12);
            }
        }
    }
}
