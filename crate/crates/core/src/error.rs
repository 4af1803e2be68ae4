use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite argument: {0}")]
    NonFiniteArgument(f64),

    #[error("argument {x} outside the supported domain: {reason}")]
    OutOfDomain { x: f64, reason: &'static str },

    #[error("series did not converge after {terms} terms")]
    SeriesNotConverged { terms: usize },

    #[error(
        "quadrature did not reach tolerance {tol:e} within {panels} panels (estimate {estimate:e})"
    )]
    QuadratureNotConverged {
        tol: f64,
        panels: usize,
        estimate: f64,
    },

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },

    #[error("non-finite value in {context} at step {step}")]
    NonFiniteState { context: &'static str, step: usize },

    #[error("oracle did not converge: successive refinements differ by {difference:e} (limit {limit:e})")]
    OracleNotConverged { difference: f64, limit: f64 },

    #[error("solve diverged for M = {steps}: {source}")]
    Diverged {
        steps: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
