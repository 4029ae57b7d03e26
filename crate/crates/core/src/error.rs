use thiserror::Error;

/// Errors raised by the library. Each variant maps to one exit code of the
/// experiment runner (see [`Error::exit_code`]).
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("stream error: {0}")]
    Stream(String),
    #[error("operation requires an i.i.d. stream with a risk oracle, got regime `{0}`")]
    UnsupportedRegime(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("invariant violation: {0}")]
    Invariant(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code associated with this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Domain(_) | Error::UnsupportedRegime(_) => 2,
            Error::Invariant(_) => 3,
            Error::Stream(_) | Error::InsufficientData(_) | Error::Io(_) => 4,
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn stream(msg: impl Into<String>) -> Self {
        Error::Stream(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
