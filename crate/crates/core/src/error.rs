use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid POVM: {0}")]
    InvalidPovm(String),

    #[error("label outside the declared domain: {0}")]
    LabelDomain(String),

    #[error("invalid loss function: {0}")]
    InvalidLoss(String),

    #[error("invalid source distribution: {0}")]
    InvalidSource(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("ensemble is not tomographically complete: {0}")]
    NotComplete(String),

    #[error("shadow dataset is empty")]
    EmptyDataset,

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("parameter out of range: {0}")]
    Range(String),

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }
}
