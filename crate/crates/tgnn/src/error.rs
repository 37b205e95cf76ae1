use thiserror::Error;

/// Library-level errors. Tensor-engine failures pass through transparently.
#[derive(Debug, Error)]
pub enum TgnnError {
    #[error(transparent)]
    Tensor(#[from] autodiff::TensorError),
    /// A dataset file does not match its declared format.
    #[error("format error: {0}")]
    Format(String),
    /// An experiment or model configuration is invalid.
    #[error("config error: {0}")]
    Config(String),
    /// A caller broke an API contract.
    #[error("contract violation: {0}")]
    Contract(String),
    /// A requested split leaves one side empty or unusable.
    #[error("degenerate split: {0}")]
    DegenerateSplit(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, TgnnError>;
