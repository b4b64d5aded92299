//! Crate-wide error type.

use std::path::PathBuf;

/// Convenience alias used by every fallible function in the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("failed to write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("failed to decode {path}: {reason}")]
    Decode { path: PathBuf, reason: String },

    #[error("unsupported pixel format: {0} (8-bit grayscale or RGB expected)")]
    UnsupportedPixelFormat(String),

    #[error("no pixel scale available: pass an explicit scale or use an image with resolution metadata")]
    ScaleUnavailable,

    #[error("shape does not fit inside the image with a 2 px margin")]
    ShapeOutOfBounds,

    #[error("degenerate histogram: fewer distinct intensities than classes")]
    DegenerateHistogram,

    #[error("mask is empty")]
    EmptyMask,

    #[error("empty result after filtering")]
    EmptyResult,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("reconstruction marker must lie {0} the bound image")]
    MarkerOutOfOrder(&'static str),

    #[error("origin lies outside the mask")]
    OriginOutsideMask,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
