use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Invalid(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("file format: {0}")]
    Format(String),
    #[error(transparent)]
    Core(#[from] lnn_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
