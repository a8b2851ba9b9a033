//! Crate-wide error type.
//!
//! One enum covers the whole pipeline so callers (notably the CLI) can map
//! failure classes onto exit codes without unwrapping nested error chains.

use thiserror::Error;

/// Errors produced anywhere in the core pipeline.
#[derive(Debug, Error)]
pub enum CoreError {
    /// Tensor shapes do not line up for the requested operation.
    #[error("shape error: {0}")]
    Shape(String),

    /// A configuration value violates its documented bounds.
    #[error("configuration error: {0}")]
    Config(String),

    /// Input data is malformed or insufficient for the requested operation.
    #[error("data error: {0}")]
    Data(String),

    /// A numeric failure (NaN/Inf) was detected mid-computation.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// An on-disk artifact (event file, checkpoint, manifest) is malformed.
    #[error("format error: {0}")]
    Format(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CoreError>;

impl CoreError {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        CoreError::Shape(msg.into())
    }
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        CoreError::Config(msg.into())
    }
    pub(crate) fn data(msg: impl Into<String>) -> Self {
        CoreError::Data(msg.into())
    }
    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        CoreError::Numeric(msg.into())
    }
    pub(crate) fn format(msg: impl Into<String>) -> Self {
        CoreError::Format(msg.into())
    }
}
