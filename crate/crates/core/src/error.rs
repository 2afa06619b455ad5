use thiserror::Error;

/// Errors raised by the optimization library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),
    #[error("unsupported operation: {0}")]
    Capability(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("numeric error: {message} (final residual {residual:.3e})")]
    Numeric { message: String, residual: f64 },
    /// An internal invariant failed. Reaching this is a bug.
    #[error("logic error: {0}")]
    Logic(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn validate(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Validation(msg()))
    }
}
