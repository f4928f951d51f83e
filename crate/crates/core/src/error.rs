use thiserror::Error;

/// Errors raised by the numerical routines and the command-line front end.
///
/// Variants are grouped so that each maps onto exactly one process exit code
/// (see [`Error::exit_code`]).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("calibration failed: {0}")]
    NoBracket(String),

    #[error("truncation could not be certified: {0}")]
    NotCertified(String),

    #[error("window out of range: {0}")]
    OutOfRange(String),

    #[error("regime dispatch failed: {0}")]
    Regime(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Process exit code for this failure.
    ///
    /// 2 = configuration / argument error, 3 = numeric certification failure,
    /// 4 = regime-dispatch error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidDistribution(_)
            | Error::InvalidArgument(_)
            | Error::Config(_)
            | Error::Io(_) => 2,
            Error::NotCertified(_)
            | Error::OutOfRange(_)
            | Error::NoBracket(_) => 3,
            Error::Precondition(_) | Error::Regime(_) => 4,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
