//! Real-time 2D direction-of-arrival estimation for a nonlinear three-microphone array.
//!
//! The crate is `no_std` (it needs `alloc`) and holds every numerical stage of
//! the pipeline:
//!
//! 1. [`correlator`]: frame segmentation and per-pair TDOA measurement using a
//!    partially whitened cross-power spectrum phase weighting, refined by
//!    quadratic interpolation.
//! 2. [`lattice`]: hemisphere lattices, TDOA mapping tables and exact
//!    nearest-neighbor inference through a k-d tree.
//! 3. [`gate`]: the three-step reliability filter.
//! 4. [`tracker`]: confidence-tracked exponential-filter clustering.
//!
//! [`geometry`] carries the array model and the closed-form solution,
//! [`calibrate`] a Levenberg–Marquardt geometry fit, and [`pipeline`] glues the
//! stages together frame by frame. File formats, audio IO, simulation and the
//! command line live in the `tridoa` crate.

#![no_std]
#![warn(missing_debug_implementations)]
#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod calibrate;
pub mod correlator;
pub mod fft;
pub mod gate;
pub mod geometry;
pub mod lattice;
pub mod metrics;
pub mod pipeline;
pub mod tracker;

mod math;

pub use calibrate::{calibrate_geometry, CalibrationResult, LmSettings};
pub use correlator::{CorrelationFunction, TdoaEstimator, TdoaMeasurement, Weighting};
pub use gate::{apply_gate, FilterThresholds, FilterVerdict, GateStage};
pub use geometry::{
    cf_map, tdoa_from_geometry, ArrayGeometry, Direction, FarFieldRadius, HemispherePoint, Pair,
    TdoaTriple,
};
pub use lattice::{
    fibonacci_lattice, latlong_lattice, FieldDataset, FieldRecord, MappingLattice, NnsMatch,
};
pub use metrics::rmse_loc;
pub use pipeline::{FrameEvent, Pipeline, PipelineConfig};
pub use tracker::{Tracker, TrackerEvent, TrackerEventKind, TrackerParams};
