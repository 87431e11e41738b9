use thiserror::Error;

/// Errors produced by the estimators, the changepoint test and the harness.
#[derive(Debug, Error)]
pub enum CovError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{what} out of range: {value} not in {range}")]
    OutOfRange {
        what: &'static str,
        value: f64,
        range: String,
    },

    #[error("matrix is not positive semidefinite (smallest pivot {smallest_pivot:e})")]
    NotPositiveSemidefinite { smallest_pivot: f64 },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("manifest validation failed: {0}")]
    Manifest(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CovError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        CovError::InvalidArgument(msg.into())
    }

    /// True for failures of the numerics themselves (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            CovError::NotPositiveSemidefinite { .. } | CovError::NonFinite(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, CovError>;
