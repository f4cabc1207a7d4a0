use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("size limit exceeded: {0}")]
    SizeLimit(String),

    #[error("cube of radius 0 has an empty inner boundary")]
    EmptyBoundary,

    #[error("field sample does not cover site {site:?}")]
    Coverage { site: Vec<i64> },

    #[error("solver did not converge after {iterations} iterations: {reason}")]
    Solver { iterations: usize, reason: String },

    #[error("energy {energy} is within {distance:e} of the spectrum; resolvent is singular")]
    SingularResolvent { energy: f64, distance: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
