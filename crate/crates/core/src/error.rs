use thiserror::Error;

/// Errors raised by the library.
///
/// The variants follow the failure classes used throughout the crate: bad
/// input data, violated preconditions of an operation, inconsistent
/// intermediate state, and requests beyond what a routine can handle.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("non-finite entry at index {index}")]
    NonFinite { index: usize },

    #[error("negative entry {value} at index {index}")]
    Negative { index: usize, value: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("inconsistent state: {0}")]
    State(String),

    #[error("capability exceeded: {0}")]
    Capability(String),

    #[error("not identifiable: {0}")]
    NotIdentifiable(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn input<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Input(msg.into()))
}
