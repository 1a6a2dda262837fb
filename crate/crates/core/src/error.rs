use thiserror::Error;

/// Errors raised by the problem model, the solvers and the IMRT tooling.
#[derive(Debug, Error)]
pub enum CoexError {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension {
        what: String,
        expected: usize,
        got: usize,
    },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
    #[error("non-finite {what} at iteration {k}")]
    NonFinite { k: usize, what: String },
    #[error("refusing problem of dimension {dim} (cap {cap})")]
    Refused { dim: u128, cap: u128 },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CoexError>;

pub(crate) fn check_dim(what: &str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(CoexError::Dimension {
            what: what.to_string(),
            expected,
            got,
        });
    }
    Ok(())
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(CoexError::Invalid(msg.into()))
}
