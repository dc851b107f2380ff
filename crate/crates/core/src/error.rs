use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller broke an operation's precondition (length mismatch, k > N, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A mutation produced a non-finite parameter outside of a population step.
    #[error("mutation produced a non-finite parameter at index {index}")]
    NonFinite { index: usize },

    /// A genome diverged to a non-finite value during a generation step.
    #[error("overflow: genome in slot {slot} became non-finite at generation {generation}")]
    Overflow { generation: u64, slot: usize },

    /// Bad or unknown configuration value.
    #[error("invalid value for `{key}`: {message}")]
    Config { key: String, message: String },

    /// Configuration values are individually valid but violate an invariant.
    #[error("validation error: {0}")]
    Validation(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}
