use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("{0}")]
    Rejected(String),
    #[error(transparent)]
    Core(#[from] myoimp::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ServiceError>;
