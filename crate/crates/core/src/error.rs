use thiserror::Error;

pub type Result<T> = std::result::Result<T, RenormError>;

#[derive(Debug, Error)]
pub enum RenormError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unsupported representation: {0}")]
    UnsupportedRepresentation(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("matrix is not positive definite (min eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("size cap exceeded: {what} would be {size}, cap is {cap}")]
    SizeCap { what: &'static str, size: u64, cap: u64 },

    #[error("bracketing failed: {0}")]
    Bracketing(String),

    #[error("linear program failed: {0}")]
    LinearProgram(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl RenormError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        RenormError::InvalidInput(msg.into())
    }
}
