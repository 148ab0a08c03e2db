//! Process-level error type. Every failure carries enough context to act on
//! (paths, key names) and maps onto one documented exit code.

use std::path::Path;

/// Top-level error, partitioned by exit code: usage 1, data 2, numeric 3.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Bad invocation or configuration, detected before any work starts.
    #[error("{0}")]
    Usage(String),
    /// Unreadable, malformed, or inconsistent inputs and outputs.
    #[error("{0}")]
    Data(String),
    /// Non-finite or degenerate numerics during computation.
    #[error("{0}")]
    Numeric(String),
}

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 1,
            Error::Data(_) => 2,
            Error::Numeric(_) => 3,
        }
    }
}

impl From<gpnd_core::Error> for Error {
    fn from(e: gpnd_core::Error) -> Self {
        use gpnd_core::Error as Core;
        match e {
            Core::NonFinite { .. }
            | Core::NonFiniteGradient
            | Core::NonFiniteLoss { .. }
            | Core::DegenerateSamples
            | Core::DegenerateLatentDims { .. } => Error::Numeric(e.to_string()),
            _ => Error::Data(e.to_string()),
        }
    }
}

/// Wraps an IO error with the path it happened on. There is deliberately no
/// blanket `From<io::Error>`: call sites must attach the path.
pub(crate) fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Data(format!("{}: {e}", path.display()))
}

pub type Result<T> = core::result::Result<T, Error>;
