//! Localization error on the unit hemisphere.

use crate::geometry::HemispherePoint;
use crate::math::sqrt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum MetricsError {
    #[error("no points to compare")]
    Empty,
    #[error("{truth} truth points but {estimates} estimates")]
    LengthMismatch { truth: usize, estimates: usize },
}

/// Root mean squared chord distance between paired points.
pub fn rmse_loc(truth: &[HemispherePoint], est: &[HemispherePoint]) -> Result<f64, MetricsError> {
    if truth.len() != est.len() {
        return Err(MetricsError::LengthMismatch {
            truth: truth.len(),
            estimates: est.len(),
        });
    }
    if truth.is_empty() {
        return Err(MetricsError::Empty);
    }
    let sum: f64 = truth
        .iter()
        .zip(est)
        .map(|(a, b)| {
            let c = a.chord(b);
            c * c
        })
        .sum();
    Ok(sqrt(sum / truth.len() as f64))
}
