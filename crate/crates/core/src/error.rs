use thiserror::Error;

/// Errors raised by the toolkit. Failed numerical checks are report content,
/// not errors; this enum covers invalid input and broken preconditions.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("function is not in the tail space: {0}")]
    NotInTailSpace(String),
    #[error("lattice mismatch: {0}")]
    LatticeMismatch(String),
    #[error("test function not supported inside the domain: {0}")]
    Support(String),
    #[error("touching violated at {witness:?}: phi - u = {excess:e}")]
    TouchingViolated { witness: Vec<f64>, excess: f64 },
    #[error("inadmissible test-function class: {0}")]
    InadmissibleTestFunction(String),
    #[error("boundary ordering violated at {witness:?}: u - v = {gap:e}")]
    BoundaryOrder { witness: Vec<f64>, gap: f64 },
    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        best: Box<crate::function_space::GridFunction>,
    },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}
