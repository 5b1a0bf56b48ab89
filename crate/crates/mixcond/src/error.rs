//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by model construction, solvers, and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration or parameters (bad lattice, potentials, sequences, ...).
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Operands with inconsistent dimensions.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A numerical routine failed (NaN/Inf, breakdown past retry limit, degenerate input).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A sector basis would exceed the configured dimension limit.
    #[error("sector too large: {0}")]
    SectorLimit(String),

    /// Filesystem failure, tagged with the offending path.
    #[error("i/o failure at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Tag an i/o error with the path it occurred at.
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
