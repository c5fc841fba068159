use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("arithmetic error: {0}")]
    Arithmetic(String),

    /// A construction produced an object that violates one of its own
    /// structural guarantees. Never expected for valid parameters.
    #[error("construction integrity violated: {0}")]
    Integrity(String),

    #[error("sequencing error: expected time {expected}, got {got}")]
    Sequencing { expected: u64, got: u64 },

    #[error("format error: {0}")]
    Format(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("position {position} missed its deadline {deadline} (horizon reached {horizon})")]
    DeadlineMiss {
        position: usize,
        deadline: usize,
        horizon: usize,
    },
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Error {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}
