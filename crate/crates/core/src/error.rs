use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by petquant operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read or write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed {format} file {path}: {reason}")]
    Format {
        format: &'static str,
        path: PathBuf,
        reason: String,
    },
    #[error("data length {actual} does not match dims {dims:?} ({expected} voxels)")]
    SizeMismatch {
        dims: [usize; 3],
        expected: usize,
        actual: usize,
    },
    #[error("voxel spacing must be positive and finite, got {0:?}")]
    InvalidSpacing([f64; 3]),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("expected a {expected} volume, got {found}")]
    WrongKind {
        expected: &'static str,
        found: &'static str,
    },
    #[error("invalid value: {0}")]
    InvalidValue(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("voxel {voxel:?} lies outside grid {dims:?}")]
    OutOfBounds { voxel: [usize; 3], dims: [usize; 3] },
    #[error("input is empty")]
    EmptyInput,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
