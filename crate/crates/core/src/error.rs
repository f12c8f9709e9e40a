use thiserror::Error;

/// Errors surfaced by the library. Validation problems and numerical
/// failures are kept apart so front ends can map them to distinct exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("weights sum {sum} ≠ 1")]
    WeightSum { sum: f64 },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("malformed input at line {line}: {message}")]
    Malformed { line: usize, message: String },

    #[error("numerical failure: {message} (residual {residual:e})")]
    Numerical { message: String, residual: f64 },

    #[error("iteration limit {max_iter} reached; final subgradient residual {residual:e}")]
    MaxIter { max_iter: usize, residual: f64 },

    #[error("instance too large: {0}")]
    TooLarge(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures caused by bad input rather than by the numerics.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Numerical { .. } | Error::MaxIter { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
