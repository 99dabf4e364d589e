use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: dimension mismatch on {axis} axis (expected {expected}, found {found})")]
    Dimension {
        op: &'static str,
        axis: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("{op}: {reason}")]
    InvalidArgument { op: &'static str, reason: String },

    #[error("{0}: backward called without a matching forward")]
    NoForwardCache(&'static str),

    #[error("format error in {path}: {kind}")]
    Format { path: String, kind: FormatError },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("empty loss support: every pixel carries the ignore label")]
    EmptyLossSupport,

    #[error("training diverged at step {step}: loss = {loss}")]
    Diverged { step: usize, loss: f64 },

    #[error("mosaic is missing tile at grid row {row}, col {col}")]
    MissingTile { row: usize, col: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("gradient check failed for {block}: relative error {rel_err:e} > {tolerance:e}")]
    GradCheck {
        block: String,
        rel_err: f64,
        tolerance: f64,
    },
}

/// Distinct container failures so callers can tell corruption from truncation.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormatError {
    #[error("bad magic {found:?}, expected {expected:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },
    #[error("unsupported version {0}")]
    UnsupportedVersion(u16),
    #[error("unsupported dtype code {0}")]
    UnsupportedDtype(u8),
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum { stored: u32, computed: u32 },
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("invalid content: {0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn dim(op: &'static str, axis: &'static str, expected: usize, found: usize) -> Self {
        Error::Dimension {
            op,
            axis,
            expected,
            found,
        }
    }

    pub fn invalid(op: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            op,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
