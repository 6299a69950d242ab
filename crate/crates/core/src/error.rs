use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A truncated series hit its term cap before the stopping rule fired.
    #[error("series did not converge within {terms} terms (last term magnitude {last_term:e})")]
    NonConvergence { terms: usize, last_term: f64 },

    #[error("schedule generation failed: {0}")]
    Generation(String),

    #[error("numeric overflow: {0}")]
    Overflow(String),

    #[error("linear algebra failure: {0}")]
    Decomposition(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
