//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid size: {0}")]
    InvalidSize(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("invalid mask: {0}")]
    Mask(String),

    #[error("raster format error: {0}")]
    Format(String),

    #[error("training diverged (non-finite loss) at step {step}")]
    Divergence { step: usize },

    #[error("non-finite state detected at sampler step {step}")]
    NonFinite { step: usize },

    #[error("missing model checkpoint: {0}")]
    MissingCheckpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
