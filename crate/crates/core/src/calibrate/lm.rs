//! Levenberg–Marquardt for small dense least-squares problems.

use alloc::vec;
use alloc::vec::Vec;

use crate::math::sqrt;

const LAMBDA_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LmSettings {
    pub lambda0: f64,
    /// Factor applied to the damping after each accepted or rejected step.
    pub scale: f64,
    pub max_iter: usize,
    /// Stop once an accepted step is shorter than this.
    pub step_tol: f64,
    /// Stop once the relative cost decrease of an accepted step is below this.
    pub residual_tol: f64,
}

impl Default for LmSettings {
    fn default() -> Self {
        Self {
            lambda0: 1e-3,
            scale: 10.0,
            max_iter: 200,
            step_tol: 1e-10,
            residual_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum LmError {
    #[error("invalid LM settings")]
    InvalidSettings,
    #[error("residual function is not finite at the starting point")]
    NonFiniteStart,
    #[error("residual function returned no residuals")]
    NoResiduals,
}

impl LmSettings {
    pub fn validate(&self) -> Result<(), LmError> {
        let ok = self.lambda0 > 0.0
            && self.scale > 1.0
            && self.step_tol > 0.0
            && self.residual_tol > 0.0
            && self.lambda0.is_finite()
            && self.scale.is_finite();
        if ok {
            Ok(())
        } else {
            Err(LmError::InvalidSettings)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmReport {
    pub x: Vec<f64>,
    /// Sum of squared residuals at `x`.
    pub cost: f64,
    /// Root mean square residual at `x`.
    pub rms: f64,
    /// Number of accepted steps.
    pub iterations: usize,
    pub converged: bool,
    /// Cost before the first step and after every accepted step.
    pub cost_history: Vec<f64>,
}

/// Central-difference Jacobian, row-major `m x n`, with per-coordinate step
/// `max(1e-7, 1e-7 |x_j|)`.
pub fn jacobian_central<F>(f: &mut F, x: &[f64], m: usize) -> Vec<f64>
where
    F: FnMut(&[f64], &mut Vec<f64>),
{
    let n = x.len();
    let mut jac = vec![0.0; m * n];
    let mut xp = x.to_vec();
    let mut rp = Vec::with_capacity(m);
    let mut rm = Vec::with_capacity(m);
    for j in 0..n {
        let h = (1e-7 * x[j].abs()).max(1e-7);
        xp[j] = x[j] + h;
        f(&xp, &mut rp);
        xp[j] = x[j] - h;
        f(&xp, &mut rm);
        xp[j] = x[j];
        for i in 0..m {
            jac[i * n + j] = (rp[i] - rm[i]) / (2.0 * h);
        }
    }
    jac
}

/// `(J^T J, J^T r)` for a row-major `m x n` Jacobian.
pub fn normal_equations(jac: &[f64], r: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut a = vec![0.0; n * n];
    let mut g = vec![0.0; n];
    for (row, &ri) in jac.chunks_exact(n).zip(r) {
        for p in 0..n {
            g[p] += row[p] * ri;
            for q in p..n {
                a[p * n + q] += row[p] * row[q];
            }
        }
    }
    for p in 0..n {
        for q in 0..p {
            a[p * n + q] = a[q * n + p];
        }
    }
    (a, g)
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// Minimizes `sum r(x)^2`. `f` writes the residual vector for `x` into its
/// second argument (cleared by `f`).
pub fn lm_minimize<F>(mut f: F, x0: &[f64], s: &LmSettings) -> Result<LmReport, LmError>
where
    F: FnMut(&[f64], &mut Vec<f64>),
{
    s.validate()?;
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut r = Vec::new();
    f(&x, &mut r);
    if r.is_empty() {
        return Err(LmError::NoResiduals);
    }
    let m = r.len();
    let mut cost = sum_sq(&r);
    if !cost.is_finite() {
        return Err(LmError::NonFiniteStart);
    }

    let mut lambda = s.lambda0;
    let mut history = vec![cost];
    let mut iterations = 0;
    let mut converged = false;
    let mut x_new = vec![0.0; n];
    let mut r_new = Vec::with_capacity(m);

    'outer: while iterations < s.max_iter {
        if cost == 0.0 {
            converged = true;
            break;
        }
        let jac = jacobian_central(&mut f, &x, m);
        let (a, g) = normal_equations(&jac, &r, n);
        loop {
            let mut damped = a.clone();
            for p in 0..n {
                let d = a[p * n + p];
                damped[p * n + p] += lambda * if d > 0.0 { d } else { 1.0 };
            }
            let rhs: Vec<f64> = g.iter().map(|v| -v).collect();
            let Some(delta) = solve(damped, rhs, n) else {
                lambda *= s.scale;
                if lambda >= LAMBDA_LIMIT {
                    break 'outer;
                }
                continue;
            };
            let step = sqrt(sum_sq(&delta));
            for p in 0..n {
                x_new[p] = x[p] + delta[p];
            }
            f(&x_new, &mut r_new);
            let cost_new = sum_sq(&r_new);
            if cost_new.is_finite() && cost_new < cost {
                let decrease = (cost - cost_new) / cost;
                x.copy_from_slice(&x_new);
                core::mem::swap(&mut r, &mut r_new);
                cost = cost_new;
                history.push(cost);
                iterations += 1;
                lambda = (lambda / s.scale).max(f64::MIN_POSITIVE);
                if step <= s.step_tol || decrease <= s.residual_tol {
                    converged = true;
                    break 'outer;
                }
                break;
            }
            if step <= s.step_tol {
                // no representable improvement left
                converged = true;
                break 'outer;
            }
            lambda *= s.scale;
            if lambda >= LAMBDA_LIMIT {
                break 'outer;
            }
        }
    }

    Ok(LmReport {
        rms: sqrt(cost / m as f64),
        x,
        cost,
        iterations,
        converged,
        cost_history: history,
    })
}

/// Gaussian elimination with partial pivoting on a row-major `n x n` system.
fn solve(mut a: Vec<f64>, mut b: Vec<f64>, n: usize) -> Option<Vec<f64>> {
    let scale = a.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if !(scale > 0.0) || !scale.is_finite() {
        return None;
    }
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))?;
        if a[pivot * n + col].abs() <= 1e-300_f64.max(scale * 1e-15) {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                a.swap(pivot * n + k, col * n + k);
            }
            b.swap(pivot, col);
        }
        for row in col + 1..n {
            let factor = a[row * n + col] / a[col * n + col];
            for k in col..n {
                a[row * n + k] -= factor * a[col * n + k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row * n + k] * x[k];
        }
        x[row] = acc / a[row * n + row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn linear_problem_solved_in_three_steps() {
        let a = [[4.0, 1.0, 0.5], [1.0, 3.0, -0.2], [0.5, -0.2, 2.0]];
        let b = [1.0, -2.0, 0.5];
        let resid = |x: &[f64], r: &mut Vec<f64>| {
            r.clear();
            r.extend((0..3).map(|i| a[i][0] * x[0] + a[i][1] * x[1] + a[i][2] * x[2] - b[i]));
        };
        let exact = solve(a.concat(), b.to_vec(), 3).unwrap();
        let s = LmSettings {
            max_iter: 3,
            ..LmSettings::default()
        };
        let rep = lm_minimize(resid, &[0.0; 3], &s).unwrap();
        assert!(rep.iterations <= 3);
        for (x, e) in rep.x.iter().zip(&exact) {
            assert_abs_diff_eq!(x, e, epsilon = 1e-8);
        }
    }

    #[test]
    fn scalar_fit() {
        let pts = [(1.0, 2.0), (2.0, 4.0)];
        let rep = lm_minimize(
            |x: &[f64], r: &mut Vec<f64>| {
                r.clear();
                r.extend(pts.iter().map(|(t, y)| x[0] * t - y));
            },
            &[0.3],
            &LmSettings::default(),
        )
        .unwrap();
        assert!(rep.converged);
        assert_abs_diff_eq!(rep.x[0], 2.0, epsilon = 1e-10);
    }

    #[test]
    fn rosenbrock() {
        let rep = lm_minimize(
            |x: &[f64], r: &mut Vec<f64>| {
                r.clear();
                r.push(10.0 * (x[1] - x[0] * x[0]));
                r.push(1.0 - x[0]);
            },
            &[-1.2, 1.0],
            &LmSettings::default(),
        )
        .unwrap();
        assert!(rep.converged);
        assert_abs_diff_eq!(rep.x[0], 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(rep.x[1], 1.0, epsilon = 1e-8);
        assert!(rep.cost_history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn rejects_nonfinite_start() {
        let err = lm_minimize(
            |_: &[f64], r: &mut Vec<f64>| {
                r.clear();
                r.push(f64::NAN);
            },
            &[0.0],
            &LmSettings::default(),
        );
        assert_eq!(err, Err(LmError::NonFiniteStart));
    }

    #[test]
    fn flat_problem_stops_without_converging() {
        // residual independent of x with nonzero cost: J = 0, every step
        // is rejected until the damping limit
        let rep = lm_minimize(
            |_: &[f64], r: &mut Vec<f64>| {
                r.clear();
                r.push(1.0);
            },
            &[0.0],
            &LmSettings::default(),
        )
        .unwrap();
        assert_eq!(rep.iterations, 0);
        assert_eq!(rep.cost, 1.0);
    }

    #[test]
    fn singular_system_detected() {
        assert!(solve(vec![1.0, 2.0, 2.0, 4.0], vec![1.0, 1.0], 2).is_none());
        let x = solve(vec![0.0, 1.0, 1.0, 0.0], vec![2.0, 3.0], 2).unwrap();
        assert_eq!(x, vec![3.0, 2.0]);
    }
}
