use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no p-values given")]
    Empty,

    #[error("invalid p-value {value} at vertex {vertex}: must be finite and in [0, 1]")]
    InvalidPValue { vertex: usize, value: f64 },

    #[error("significance level {0} must lie strictly between 0 and 1")]
    InvalidAlpha(f64),

    #[error("statistic must be finite, got {0}")]
    NonFiniteStatistic(f64),

    #[error("q(S) is undefined for the empty set")]
    EmptySet,

    #[error("discretised p-value at chain position {position} is {value}, must be at least 1")]
    InvalidDiscretised { position: usize, value: u64 },

    #[error("TDP threshold {0} outside [0, 1]")]
    InvalidGamma(f64),

    #[error("size mismatch: {what} has {found} entries, expected {expected}")]
    SizeMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("grid has no in-mask voxels")]
    EmptyMask,

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid volume header {path}: {message}")]
    Header { path: PathBuf, message: String },

    #[error("NaN statistic inside the mask at voxel ({x}, {y}, {z})")]
    NanInMask { x: usize, y: usize, z: usize },

    #[error("invalid forest: {0}")]
    InvalidForest(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
