//! Three-step reliability filter applied to every frame measurement.
//!
//! A frame is accepted only if all three pairs show an active correlation
//! peak, every peak dominates its lag range, and the measured triple lies
//! close to some stored lattice triple. Stages run in that order and the
//! first failure is reported.

use crate::correlator::{CorrelationFunction, TdoaMeasurement};
use crate::geometry::Direction;
use crate::lattice::MappingLattice;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("gate thresholds must be positive (t_beta at most 1): t_r={t_r}, t_beta={t_beta}, t_q={t_q}")]
pub struct InvalidThresholds {
    pub t_r: f64,
    pub t_beta: f64,
    pub t_q: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FilterThresholds {
    /// Minimum correlation peak height.
    pub t_r: f64,
    /// Minimum peak dominance.
    pub t_beta: f64,
    /// Maximum squared NNS error, m².
    pub t_q: f64,
}

impl Default for FilterThresholds {
    fn default() -> Self {
        Self {
            t_r: 1e-2,
            t_beta: 0.5,
            t_q: 5e-5,
        }
    }
}

impl FilterThresholds {
    pub fn validate(&self) -> Result<(), InvalidThresholds> {
        let ok = self.t_r > 0.0
            && self.t_r.is_finite()
            && self.t_beta > 0.0
            && self.t_beta <= 1.0
            && self.t_q > 0.0
            && self.t_q.is_finite();
        if ok {
            Ok(())
        } else {
            Err(InvalidThresholds {
                t_r: self.t_r,
                t_beta: self.t_beta,
                t_q: self.t_q,
            })
        }
    }
}

/// Stage at which a frame was rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum GateStage {
    None,
    Activity,
    Dominance,
    Coherence,
}

impl GateStage {
    pub fn as_str(self) -> &'static str {
        match self {
            GateStage::None => "none",
            GateStage::Activity => "activity",
            GateStage::Dominance => "dominance",
            GateStage::Coherence => "coherence",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterVerdict {
    pub failed_stage: GateStage,
    /// NNS direction, present iff the frame was accepted.
    pub direction: Option<Direction>,
    /// Squared distance to the nearest lattice triple, when stage 3 ran.
    pub nns_error: Option<f64>,
    pub betas: [f64; 3],
}

impl FilterVerdict {
    pub fn accepted(&self) -> bool {
        self.failed_stage == GateStage::None
    }
}

/// Peak dominance `1 - eta / R(l_max)`, where `eta` is the mean positive part
/// of the correlation over every other lag in range.
pub fn compute_beta(corr: &CorrelationFunction) -> f64 {
    let peak_lag = corr.peak_lag();
    let peak = corr.peak_value();
    let others = corr.values().len() - 1;
    if others == 0 {
        return 1.0;
    }
    if !(peak > 0.0) {
        return 0.0;
    }
    let sum: f64 = corr
        .iter()
        .filter(|&(l, _)| l != peak_lag)
        .map(|(_, v)| v.max(0.0))
        .sum();
    let eta = sum / others as f64;
    (1.0 - eta / peak).clamp(0.0, 1.0)
}

pub fn apply_gate(
    m: &TdoaMeasurement,
    lattice: &MappingLattice,
    th: &FilterThresholds,
) -> FilterVerdict {
    let betas = [0, 1, 2].map(|i| compute_beta(&m.pairs[i].corr));
    let reject = |stage, nns_error| FilterVerdict {
        failed_stage: stage,
        direction: None,
        nns_error,
        betas,
    };
    if !m.pairs.iter().all(|p| p.peak_value > th.t_r) {
        return reject(GateStage::Activity, None);
    }
    if !betas.iter().all(|&b| b > th.t_beta) {
        return reject(GateStage::Dominance, None);
    }
    let hit = lattice.nearest(&m.q);
    if !(hit.squared_error < th.t_q) {
        return reject(GateStage::Coherence, Some(hit.squared_error));
    }
    FilterVerdict {
        failed_stage: GateStage::None,
        direction: Some(hit.direction),
        nns_error: Some(hit.squared_error),
        betas,
    }
}
