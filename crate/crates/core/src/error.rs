use thiserror::Error;

/// Errors shared by every module of the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid transition: {0}")]
    InvalidTransition(String),
    #[error("uncertainty set is empty")]
    EmptySet,
    #[error("unsupported uncertainty set: {0}")]
    UnsupportedSet(String),
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    #[error("limit reached: {0}")]
    Limit(String),
    #[error("numerical instability: {0}")]
    Numerical(String),
    #[error("i/o failure: {0}")]
    Io(String),
}

impl Error {
    /// Process exit code used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Capacity(_) | Error::Limit(_) => 3,
            Error::Numerical(_) => 1,
            _ => 2,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
