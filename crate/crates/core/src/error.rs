use thiserror::Error;

/// Errors raised by the estimators, samplers and simulation engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum JpsError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Rank stratum (1-based) with no observations where one is required.
    #[error("rank stratum {stratum} is empty")]
    EmptyStratum { stratum: usize },

    #[error("distribution has zero variance; concomitant ranking is undefined")]
    ZeroVariance,

    #[error("conditioning scheme `{scheme}` exhausted after {attempts} attempts")]
    ConditioningExhausted { scheme: &'static str, attempts: usize },

    #[error("ordinal logistic fit failed: {0}")]
    OlrFailure(String),
}

pub type Result<T> = std::result::Result<T, JpsError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(JpsError::InvalidArgument(msg.into()))
}
