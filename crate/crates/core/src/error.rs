//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration violates a structural invariant (e.g. `K > N`).
    #[error("invalid configuration: {0}")]
    Config(String),

    /// An argument is outside the operation's domain (e.g. non-positive
    /// distance, non-positive Beta shape).
    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical operation failed in a way that cannot be recovered
    /// (singular covariance, failed factorization).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The maintained inverse has lost consistency with the covariance;
    /// the caller should refactorize the state and retry.
    #[error("internal consistency lost ({0}); refactorization required")]
    LostDefiniteness(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serialization(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
