use thiserror::Error;

/// Errors raised by the tensor engine.
#[derive(Debug, Error)]
pub enum TensorError {
    /// Operand shapes do not conform for the named op.
    #[error("{op}: shape mismatch: {detail}")]
    Shape { op: &'static str, detail: String },
    /// A caller broke an API contract (non-scalar backward root, missing
    /// gradient, out-of-range index, ...).
    #[error("contract violation: {0}")]
    Contract(String),
    /// Input outside the mathematical domain of the op.
    #[error("domain error: {0}")]
    Domain(String),
    /// A computation produced a non-finite value where one is required.
    #[error("numeric error: {0}")]
    Numeric(String),
}

impl TensorError {
    pub fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        TensorError::Shape {
            op,
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, TensorError>;
