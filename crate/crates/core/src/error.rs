use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("file not found: {0}")]
    NotFound(PathBuf),

    #[error("malformed header {path}: {reason}")]
    Header { path: PathBuf, reason: String },

    #[error("unknown dtype {0:?} (expected \"f32\" or \"u8\")")]
    UnknownDtype(String),

    #[error("payload length mismatch: expected {expected} bytes, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("non-finite value at voxel {index}")]
    NonFinite { index: usize },

    #[error("label {value} at voxel {index} is out of range for {num_classes} classes")]
    LabelOutOfRange {
        index: usize,
        value: u8,
        num_classes: u8,
    },

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("geometry mismatch: {left:?} vs {right:?}")]
    GeometryMismatch { left: [usize; 3], right: [usize; 3] },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty mask: {0}")]
    EmptyMask(&'static str),

    #[error("optimization diverged at iteration {iteration}: loss is not finite")]
    Diverged { iteration: usize },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::NotFound(path)
        } else {
            Error::Io { path, source }
        }
    }

    /// True for errors that originate in the file system rather than in the data.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. } | Error::NotFound(_))
    }

    /// True for numeric failures (divergence).
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Diverged { .. })
    }
}
