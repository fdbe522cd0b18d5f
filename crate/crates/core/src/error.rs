use thiserror::Error;

/// Errors produced by the estimators and kernels in this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("matrix is not symmetric: |m[{row},{col}] - m[{col},{row}]| = {diff:e}")]
    NotSymmetric { row: usize, col: usize, diff: f64 },

    #[error("matrix contains a non-finite entry at ({row},{col})")]
    NonFinite { row: usize, col: usize },

    #[error("singular matrix: {0}")]
    Singular(String),

    /// An iterative routine hit its iteration cap. The last iterate is kept so
    /// callers can inspect or reuse it.
    #[error("{routine} did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged {
        routine: &'static str,
        iterations: usize,
        residual: f64,
        last_iterate: Vec<f64>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
