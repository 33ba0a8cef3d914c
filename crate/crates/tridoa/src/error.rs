use std::path::PathBuf;

use tridoa_core::calibrate::CalibrationError;
use tridoa_core::geometry::GeometryError;
use tridoa_core::lattice::LatticeError;
use tridoa_core::pipeline::PipelineError;

use crate::io::wav::AudioError;
use crate::simulate::SimError;

/// Broad failure class, reported through the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Io,
    Format,
    Audio,
    Invalid,
    Processing,
}

impl Category {
    pub fn exit_code(self) -> i32 {
        match self {
            Category::Io => 3,
            Category::Format => 4,
            Category::Audio => 5,
            Category::Invalid => 6,
            Category::Processing => 7,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Io => "io",
            Category::Format => "format",
            Category::Audio => "audio",
            Category::Invalid => "invalid-input",
            Category::Processing => "processing",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: unsupported {kind} version {found} (expected {expected})", path.display())]
    Version {
        path: PathBuf,
        kind: &'static str,
        found: u32,
        expected: u32,
    },
    #[error("{}: {message}", path.display())]
    Schema { path: PathBuf, message: String },
    #[error("{}: {source}", path.display())]
    Audio {
        path: PathBuf,
        #[source]
        source: AudioError,
    },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Simulation(#[from] SimError),
    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn schema(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Schema {
            path: path.into(),
            message: message.to_string(),
        }
    }

    pub fn category(&self) -> Category {
        match self {
            Error::Io { .. } => Category::Io,
            Error::Version { .. } | Error::Schema { .. } => Category::Format,
            Error::Audio { .. } => Category::Audio,
            Error::Geometry(_) | Error::Lattice(_) | Error::Invalid(_) => Category::Invalid,
            Error::Calibration(_) | Error::Simulation(_) => Category::Processing,
            Error::Pipeline(PipelineError::Config(_) | PipelineError::Thresholds(_)) => {
                Category::Invalid
            }
            Error::Pipeline(_) => Category::Processing,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
