//! Error types shared across the core crate.

use alloc::string::String;

/// Errors raised by validation and numeric guards in the core pipeline.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CoreError {
    /// Tensor or image shapes do not line up for the requested operation.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// An input contained NaN or infinite values.
    #[error("non-finite values in {0}")]
    NonFinite(&'static str),

    /// A value fell outside its documented domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A model configuration failed validation.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// Contrastive denominator is exactly zero and the epsilon guard is
    /// disabled (anchor and negative sample are feature-identical).
    #[error("contrastive denominator is zero at layer {layer} and the epsilon guard is disabled")]
    ZeroContrastDenominator { layer: usize },

    /// Training produced a non-finite loss.
    #[error("non-finite loss at epoch {epoch}, iteration {iter}: {detail}")]
    NonFiniteLoss { epoch: usize, iter: usize, detail: String },

    /// Checkpoint payload does not match the model it is loaded into.
    #[error("checkpoint mismatch: {0}")]
    CheckpointMismatch(String),
}

pub type Result<T> = core::result::Result<T, CoreError>;

impl CoreError {
    pub fn shape(msg: impl core::fmt::Display) -> Self {
        CoreError::ShapeMismatch(alloc::format!("{msg}"))
    }

    pub fn invalid(msg: impl core::fmt::Display) -> Self {
        CoreError::InvalidArgument(alloc::format!("{msg}"))
    }

    pub fn config(msg: impl core::fmt::Display) -> Self {
        CoreError::InvalidConfig(alloc::format!("{msg}"))
    }
}
