use thiserror::Error;

/// Errors raised by the model, optimizer and pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The model has no feasible design for the given inputs.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// A file could not be read or written.
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },

    /// An input row failed to parse or validate.
    #[error("parse error in {source_name} at row {row}: {message}")]
    Parse {
        source_name: String,
        row: usize,
        message: String,
    },
}

pub type Result<T> = std::result::Result<T, ModelError>;

pub(crate) fn domain(msg: impl Into<String>) -> ModelError {
    ModelError::Domain(msg.into())
}

pub(crate) fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(ModelError::Domain(msg()))
    }
}
