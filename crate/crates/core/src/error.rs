use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("dimension mismatch: {0}")]
    DimsMismatch(String),

    #[error("out of bounds: {0}")]
    OutOfBounds(String),

    #[error("empty mask: {0}")]
    EmptyMask(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("format error in {path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A windowed metric was asked to evaluate under a mask that is not a
    /// filled rectangle.
    #[error(
        "metric `{metric}` combines neighboring pixels and only accepts masks that are a filled \
         rectangle (evaluated as a crop); use a rectangular mask, crop explicitly, or pick a \
         pointwise metric (mae, mse, psnr, pcc, mi, nmi)"
    )]
    NonRectangularMask { metric: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }
}
