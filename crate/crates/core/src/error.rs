use thiserror::Error;

/// Errors raised across the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("coefficient field rejected: {0}")]
    Coefficients(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    #[error("malformed field file: {0}")]
    Format(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension { expected, found })
    }
}
