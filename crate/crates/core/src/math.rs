pub(crate) use libm::{acos, atan2, ceil, cos, floor, pow, sin, sqrt};

pub(crate) type Vec3 = [f64; 3];

#[inline]
pub(crate) fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub(crate) fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub(crate) fn norm(a: Vec3) -> f64 {
    sqrt(dot(a, a))
}

#[inline]
pub(crate) fn sq_dist(a: Vec3, b: Vec3) -> f64 {
    let d = sub(a, b);
    d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
}

/// Wraps an angle into `[-pi, pi)`.
#[inline]
pub(crate) fn wrap_pi(angle: f64) -> f64 {
    use core::f64::consts::PI;
    if (-PI..PI).contains(&angle) {
        return angle;
    }
    let tau = 2.0 * PI;
    let mut a = (angle + PI) % tau;
    if a < 0.0 {
        a += tau;
    }
    a - PI
}

/// Euclidean remainder, always in `[0, m)` for positive `m`.
#[inline]
pub(crate) fn rem_euclid(a: f64, m: f64) -> f64 {
    let r = libm::fmod(a, m);
    if r < 0.0 {
        r + m
    } else {
        r
    }
}
