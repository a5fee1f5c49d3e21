use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("exponent p = {p} outside the admissible range for d = {d}: {reason}")]
    ExponentRange { p: f64, d: usize, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("no real roots: {0}")]
    NoRealRoots(String),

    #[error("{solver} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("singular linear system (pivot {pivot:.3e} at row {row})")]
    SingularSystem { row: usize, pivot: f64 },

    #[error("positivity lost: min value {min:.3e} at t = {time:.6e}; {hint}")]
    Positivity { min: f64, time: f64, hint: String },

    #[error("quadrature tolerance not met: estimated error {estimate:.3e}")]
    Tolerance { estimate: f64 },

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidParameter(msg.into()))
}
