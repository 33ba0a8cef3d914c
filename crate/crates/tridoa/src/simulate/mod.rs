//! Scene rendering, synthetic field datasets and the experiment harnesses.

pub mod evaluate;
pub mod experiments;
pub mod field;
pub mod fracdelay;
pub mod scene;
pub mod sweep;

pub use evaluate::{evaluate_tracking, SourceReport, TrackingReport};
pub use field::{synthesize_field_dataset, FieldMode, FieldSpec};
pub use scene::{
    load_scene, render_components, render_scene, save_scene, truth_log, Rendered, Rotation,
    SceneSpec, SourceKind, SourceSpec,
};
pub use sweep::{run_noise_sweep, SweepConfig, SweepReport, SweepRow};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("source {index}: delay {delay_s:.3} s exceeds the renderer limit of {max_s} s")]
    DelayOutOfRange { index: usize, delay_s: f64, max_s: f64 },
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
    #[error(transparent)]
    Correlator(#[from] tridoa_core::correlator::CorrelatorError),
    #[error(transparent)]
    Lattice(#[from] tridoa_core::lattice::LatticeError),
    #[error(transparent)]
    Calibration(#[from] tridoa_core::calibrate::CalibrationError),
}
