//! File formats, simulation and experiment harnesses around `tridoa-core`.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod error;
pub mod io;
pub mod simulate;

pub use error::{Category, Error, Result};
pub use tridoa_core as core;
