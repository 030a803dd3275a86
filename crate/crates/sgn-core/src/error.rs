//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SgnError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("empty batch")]
    EmptyBatch,

    #[error("empty dataset")]
    EmptyDataset,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid label: {0}")]
    InvalidLabel(String),

    /// A rank-one update or factorization produced a value that is impossible
    /// for a symmetric positive definite state; signals corrupted state.
    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    /// Non-finite value detected during training; the run is aborted rather
    /// than clamped so that experiment logs stay trustworthy.
    #[error("non-finite value at iteration {iteration}: {quantity}")]
    NonFinite { iteration: usize, quantity: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SgnError>;
