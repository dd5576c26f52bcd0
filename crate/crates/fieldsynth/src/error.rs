//! Error type shared across the crate.
//!
//! Two families matter to callers: usage errors (bad arguments, invalid
//! configuration, geometry violations) and numerical failures (rank
//! deficiency, non-finite intermediates). The CLI maps the former to exit
//! code 2 and the latter to exit code 3.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the supported domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A region or discretization request is geometrically inadmissible.
    #[error("geometry error: {0}")]
    Geometry(String),

    /// A configuration file is missing, unparsable, or inconsistent.
    #[error("config error: {0}")]
    Config(String),

    /// A numerical procedure failed (rank deficiency, overflow, divergence).
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code the CLI reports for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) | Error::Geometry(_) | Error::Config(_) => 2,
            Error::Io(_) => 2,
            Error::Numerical(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
