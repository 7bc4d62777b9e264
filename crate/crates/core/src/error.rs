use thiserror::Error;

/// Errors raised by the library. `Validation` maps to exit code 1 in the
/// CLI, every other variant to exit code 2.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("point outside domain")]
    OutsideDomain,
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("divergent integral: {0}")]
    Divergent(String),
    #[error("bracketing failed: {0}")]
    Bracketing(String),
    #[error("factorization failed: {0}")]
    Factorization(String),
    #[error("series did not converge: {0}")]
    NonConvergent(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Validation(_) | Error::Dimension { .. } | Error::OutsideDomain)
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Validation(msg.into()))
}
