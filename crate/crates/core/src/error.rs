use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Adaptive quadrature ran out of subdivisions (or hit a non-finite
    /// integrand value) before reaching the requested tolerance.
    #[error("quadrature failed after {subdivisions} subdivisions: partial value {partial} (error estimate {err_estimate:e})")]
    QuadratureFailure {
        partial: f64,
        err_estimate: f64,
        subdivisions: usize,
    },

    #[error("degenerate leftover chain: {0}")]
    DegenerateChain(String),

    #[error("boundary 1 is inaccessible for kappa = 1; use a finite horizon instead of running until absorption")]
    BoundaryInaccessible,

    #[error("expected absorption time is infinite for kappa = 1")]
    InfiniteExpectation,

    #[error("unresolved case: {0}")]
    UnresolvedCase(String),

    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
