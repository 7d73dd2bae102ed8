use thiserror::Error;

/// Errors raised across the library.
///
/// The variants mirror the failure classes the experiment runner maps onto
/// exit codes: configuration and usage problems are caller mistakes, domain
/// errors are inputs outside an operation's mathematical domain.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("kernel singularity: x and y coincide at {0:?}")]
    Singular(Vec<f64>),
    #[error("covariance factorization failed after jitter {jitter:e}: {diagnostic}")]
    Factorization { jitter: f64, diagnostic: String },
    #[error("non-finite Monte Carlo sample at seed {seed}")]
    NonFinite { seed: u64 },
    #[error("check failed: {0}")]
    CheckFailed(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

pub(crate) fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Usage(msg.into()))
}
