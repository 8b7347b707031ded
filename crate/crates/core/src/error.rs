use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid format: {0}")]
    InvalidFormat(String),
    #[error("operation requires all factor dimensions equal, got r = {0:?}")]
    UnequalDimensions(Vec<usize>),
    #[error("no valid schedule: {0}")]
    NoSchedule(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("linear system has no nonzero sections")]
    EmptySystem,
    #[error("term {term} has a zero linear form in factor {factor}")]
    ZeroLinearForm { term: usize, factor: usize },
    #[error("size too large for dense linear algebra: {0}")]
    TooLarge(String),
    #[error("malformed tensor file: {0}")]
    TensorFile(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
