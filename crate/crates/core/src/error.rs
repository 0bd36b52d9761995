use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Inputs outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// An exact computation would exceed the enumeration guard.
    #[error("resource guard exceeded: {0}")]
    Resource(String),
    /// Malformed textual input (population files, weight descriptors).
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
