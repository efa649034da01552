use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A computation would exceed a configured budget or cap.
    #[error("size error: {what} needs {requested}, cap is {cap}")]
    Size { what: String, requested: u128, cap: u128 },

    /// Exact integer arithmetic overflowed its machine representation.
    #[error("arithmetic overflow in {0}")]
    Overflow(String),

    /// A table allocation failed.
    #[error("resource error: could not allocate {bytes} bytes for {what}")]
    Resource { what: String, bytes: usize },

    /// An internal identity failed; this is a bug, not an input error.
    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("least-squares design is ill-conditioned: {0}")]
    Conditioning(String),

    #[error("Euler product does not converge: {0}")]
    NonConvergent(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code: 2 for bad input, 3 for an exceeded budget, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Domain(_) => 2,
            Error::Size { .. } | Error::Resource { .. } => 3,
            _ => 1,
        }
    }

    pub(crate) fn size(what: impl Into<String>, requested: u128, cap: u128) -> Self {
        Error::Size {
            what: what.into(),
            requested,
            cap,
        }
    }

    pub(crate) fn overflow(what: impl Into<String>) -> Self {
        Error::Overflow(what.into())
    }
}
