use thiserror::Error;

use crate::shrinkage::Hyperparams;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Dimensions, signs, or finiteness of the inputs are wrong.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The input is valid but the requested estimator is undefined on it
    /// (for example a zero difference vector in a Stein-type denominator).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// An iterative solver stopped without meeting its tolerance.
    #[error("solver failed: {message}")]
    Solver {
        message: String,
        best: Option<Hyperparams>,
    },

    /// A precondition on the configuration was violated.
    #[error("configuration error: {0}")]
    Config(String),

    /// Unit-level records could not be reduced to stratum summaries.
    #[error("aggregation error: {0}")]
    Aggregation(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
