use thiserror::Error;

/// Failure classes shared by every module.
///
/// The variants map one-to-one onto the runner's exit codes, so keep them coarse.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum MspeError {
    #[error("argument error: {0}")]
    Argument(String),
    #[error("resource error: {0}")]
    Resource(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("empty ensemble: {0}")]
    EmptyEnsemble(String),
}

pub type Result<T> = std::result::Result<T, MspeError>;

pub(crate) fn arg<T>(msg: impl Into<String>) -> Result<T> {
    Err(MspeError::Argument(msg.into()))
}

pub(crate) fn resource<T>(msg: impl Into<String>) -> Result<T> {
    Err(MspeError::Resource(msg.into()))
}

pub(crate) fn numeric<T>(msg: impl Into<String>) -> Result<T> {
    Err(MspeError::Numeric(msg.into()))
}
