//! Array geometry fit from a labeled TDOA dataset.
//!
//! The parameters `(b, c_x, c_y)` are adjusted so the model TDOAs of every
//! record's known direction match the measured triples in the least-squares
//! sense. Records carrying a source distance are modeled at that distance,
//! the rest at the far-field radius.

pub mod lm;

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::geometry::{direction_to_point, ArrayGeometry, FarFieldRadius, GeometryError};
use crate::lattice::FieldDataset;
use crate::math::{rem_euclid, sqrt, Vec3};

pub use lm::{jacobian_central, lm_minimize, normal_equations, LmError, LmReport, LmSettings};

pub const MIN_RECORDS: usize = 10;
/// Minimum azimuth span of a calibration dataset, radians.
pub const MIN_AZIMUTH_COVERAGE: f64 = PI / 2.0;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum CalibrationError {
    #[error("calibration needs at least {MIN_RECORDS} records, got {0}")]
    TooFewRecords(usize),
    #[error("dataset spans only {0:.1} degrees of azimuth, need at least 90")]
    NarrowAzimuth(f64),
    #[error(transparent)]
    Lm(#[from] LmError),
    #[error("fitted geometry is invalid: {0}")]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationResult {
    pub geometry: ArrayGeometry,
    /// RMS over all stacked pair residuals, meters.
    pub rms_residual: f64,
    pub initial_rms: f64,
    pub iterations: usize,
    pub converged: bool,
    pub cost_history: Vec<f64>,
}

/// Azimuth span of a set of angles: `2 pi` minus the widest circular gap.
pub fn azimuth_coverage(thetas: impl IntoIterator<Item = f64>) -> f64 {
    let mut t: Vec<f64> = thetas
        .into_iter()
        .map(|a| rem_euclid(a, 2.0 * PI))
        .collect();
    if t.len() < 2 {
        return 0.0;
    }
    t.sort_by(f64::total_cmp);
    let mut gap = t[0] + 2.0 * PI - t[t.len() - 1];
    for w in t.windows(2) {
        gap = gap.max(w[1] - w[0]);
    }
    2.0 * PI - gap
}

struct Target {
    source: Vec3,
    q: [f64; 3],
}

fn model(x: &[f64], s: &Vec3) -> [f64; 3] {
    let d = |m: Vec3| {
        let (a, b, c) = (s[0] - m[0], s[1] - m[1], s[2] - m[2]);
        sqrt(a * a + b * b + c * c)
    };
    let d1 = d([0.0, 0.0, 0.0]);
    let d2 = d([x[0], 0.0, 0.0]);
    let d3 = d([x[1], x[2], 0.0]);
    [d1 - d2, d1 - d3, d2 - d3]
}

/// Stacked residual vector of a calibration problem, for inspection and
/// testing.
pub fn calibration_residuals(ds: &FieldDataset, g: &ArrayGeometry, r: FarFieldRadius) -> Vec<f64> {
    let targets = targets(ds, r);
    let mut out = Vec::new();
    fill_residuals(&targets, &[g.b(), g.c_x(), g.c_y()], &mut out);
    out
}

fn targets(ds: &FieldDataset, r: FarFieldRadius) -> Vec<Target> {
    ds.records
        .iter()
        .map(|rec| {
            let p = direction_to_point(rec.direction);
            let range = rec.distance.unwrap_or(r.get());
            Target {
                source: [p.x * range, p.y * range, p.z * range],
                q: rec.tdoa.as_array(),
            }
        })
        .collect()
}

fn fill_residuals(targets: &[Target], x: &[f64], out: &mut Vec<f64>) {
    out.clear();
    for t in targets {
        let q = model(x, &t.source);
        out.extend([q[0] - t.q[0], q[1] - t.q[1], q[2] - t.q[2]]);
    }
}

pub fn calibrate_geometry(
    ds: &FieldDataset,
    init: &ArrayGeometry,
    r: FarFieldRadius,
    s: &LmSettings,
) -> Result<CalibrationResult, CalibrationError> {
    if ds.len() < MIN_RECORDS {
        return Err(CalibrationError::TooFewRecords(ds.len()));
    }
    let coverage = azimuth_coverage(ds.records.iter().map(|r| r.direction.theta));
    if coverage < MIN_AZIMUTH_COVERAGE {
        return Err(CalibrationError::NarrowAzimuth(coverage.to_degrees()));
    }
    let targets = targets(ds, r);
    let x0 = [init.b(), init.c_x(), init.c_y()];
    let report = lm_minimize(|x, out| fill_residuals(&targets, x, out), &x0, s)?;
    let geometry = ArrayGeometry::new(report.x[0], report.x[1], report.x[2])?;
    let m = (3 * targets.len()) as f64;
    Ok(CalibrationResult {
        geometry,
        rms_residual: report.rms,
        initial_rms: sqrt(report.cost_history[0] / m),
        iterations: report.iterations,
        converged: report.converged,
        cost_history: report.cost_history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{tdoa_for_direction, Direction, TdoaTriple};
    use crate::lattice::{fibonacci_lattice, FieldRecord};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn truth() -> ArrayGeometry {
        ArrayGeometry::new(0.1, 0.05, 0.12).unwrap()
    }

    fn dataset(g: &ArrayGeometry, n: usize, sigma: f64, seed: u64) -> FieldDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, sigma.max(f64::MIN_POSITIVE)).unwrap();
        let records = fibonacci_lattice(n)
            .into_iter()
            .map(|d| {
                let q = tdoa_for_direction(g, d, 100.0).as_array();
                let mut e = [0.0; 3];
                if sigma > 0.0 {
                    e = [noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng)];
                }
                FieldRecord {
                    direction: d,
                    tdoa: TdoaTriple::new(q[0] + e[0], q[1] + e[1], q[2] + e[2]),
                    distance: None,
                }
            })
            .collect();
        FieldDataset::new(records)
    }

    fn perturbed(g: &ArrayGeometry, mm: f64) -> ArrayGeometry {
        let d = mm * 1e-3;
        ArrayGeometry::new(g.b() + d, g.c_x() + d, g.c_y() + d).unwrap()
    }

    #[test]
    fn recovers_noiseless_geometry() {
        let g = truth();
        let ds = dataset(&g, 500, 0.0, 0);
        let res = calibrate_geometry(&ds, &perturbed(&g, 5.0), FarFieldRadius::default(), &LmSettings::default()).unwrap();
        assert!(res.converged);
        // 1e-4 mm
        assert_abs_diff_eq!(res.geometry.b(), g.b(), epsilon = 1e-7);
        assert_abs_diff_eq!(res.geometry.c_x(), g.c_x(), epsilon = 1e-7);
        assert_abs_diff_eq!(res.geometry.c_y(), g.c_y(), epsilon = 1e-7);
        assert!(res.rms_residual < 1e-9);
        assert!(res.cost_history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn exact_init_converges_immediately() {
        let g = truth();
        let ds = dataset(&g, 200, 0.0, 0);
        let res = calibrate_geometry(&ds, &g, FarFieldRadius::default(), &LmSettings::default()).unwrap();
        assert!(res.converged);
        assert!(res.iterations <= 1);
        assert!(res.rms_residual < 1e-12);
    }

    #[test]
    fn noisy_recovery_within_half_millimeter() {
        let g = truth();
        let sigma = 1e-4;
        for seed in 0..20 {
            let ds = dataset(&g, 500, sigma, seed);
            let res = calibrate_geometry(&ds, &perturbed(&g, 5.0), FarFieldRadius::default(), &LmSettings::default()).unwrap();
            assert!((res.geometry.b() - g.b()).abs() < 5e-4);
            assert!((res.geometry.c_x() - g.c_x()).abs() < 5e-4);
            assert!((res.geometry.c_y() - g.c_y()).abs() < 5e-4);
            // each residual carries roughly sigma of noise
            assert!(res.rms_residual > 0.5 * sigma && res.rms_residual < 2.0 * sigma);
            assert!(res.rms_residual <= res.initial_rms);
        }
    }

    #[test]
    fn uses_record_distance() {
        let g = truth();
        let records: alloc::vec::Vec<FieldRecord> = fibonacci_lattice(300)
            .into_iter()
            .map(|d| FieldRecord {
                direction: d,
                tdoa: tdoa_for_direction(&g, d, 0.6),
                distance: Some(0.6),
            })
            .collect();
        let ds = FieldDataset::new(records);
        let res = calibrate_geometry(&ds, &perturbed(&g, 3.0), FarFieldRadius::default(), &LmSettings::default()).unwrap();
        assert_abs_diff_eq!(res.geometry.b(), g.b(), epsilon = 1e-7);
        assert_abs_diff_eq!(res.geometry.c_y(), g.c_y(), epsilon = 1e-7);
    }

    #[test]
    fn rejects_poor_datasets() {
        let g = truth();
        let small = dataset(&g, 5, 0.0, 0);
        assert_eq!(
            calibrate_geometry(&small, &g, FarFieldRadius::default(), &LmSettings::default()),
            Err(CalibrationError::TooFewRecords(5))
        );
        let narrow: alloc::vec::Vec<FieldRecord> = (0..20)
            .map(|i| {
                let d = Direction::new(i as f64 * 0.02, 0.3).unwrap();
                FieldRecord {
                    direction: d,
                    tdoa: tdoa_for_direction(&g, d, 100.0),
                    distance: None,
                }
            })
            .collect();
        assert!(matches!(
            calibrate_geometry(&FieldDataset::new(narrow), &g, FarFieldRadius::default(), &LmSettings::default()),
            Err(CalibrationError::NarrowAzimuth(_))
        ));
    }

    #[test]
    fn coverage_wraps_around() {
        let c = azimuth_coverage([3.0, -3.0]);
        assert_abs_diff_eq!(c, 2.0 * PI - 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(azimuth_coverage([0.0, PI / 2.0, PI]), PI, epsilon = 1e-12);
    }

    #[test]
    fn central_and_forward_gradients_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let jitter = Normal::new(0.0, 3e-3).unwrap();
        for seed in 0..10 {
            let g = truth();
            let ds = dataset(&g, 100, 1e-4, seed);
            let targets = targets(&ds, FarFieldRadius::default());
            let x = [
                g.b() + jitter.sample(&mut rng),
                g.c_x() + jitter.sample(&mut rng),
                g.c_y() + jitter.sample(&mut rng),
            ];
            let mut f = |x: &[f64], out: &mut alloc::vec::Vec<f64>| fill_residuals(&targets, x, out);
            let mut r = alloc::vec::Vec::new();
            f(&x, &mut r);
            let m = r.len();
            let central = jacobian_central(&mut f, &x, m);

            let mut forward = alloc::vec![0.0; m * 3];
            let mut rp = alloc::vec::Vec::new();
            for j in 0..3 {
                let h = 1e-8;
                let mut xp = x;
                xp[j] += h;
                f(&xp, &mut rp);
                for i in 0..m {
                    forward[i * 3 + j] = (rp[i] - r[i]) / h;
                }
            }
            let (a1, g1) = normal_equations(&central, &r, 3);
            let (a2, g2) = normal_equations(&forward, &r, 3);
            for (u, v) in a1.iter().zip(&a2) {
                assert!((u - v).abs() <= 1e-4 * u.abs().max(1e-12));
            }
            for (u, v) in g1.iter().zip(&g2) {
                assert!((u - v).abs() <= 1e-4 * u.abs().max(1e-12), "{u} vs {v}");
            }
        }
    }
}
