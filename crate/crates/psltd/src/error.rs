//! Crate-wide error type.
//!
//! Variants map one-to-one onto process exit codes so the CLI can translate
//! failures without string matching: config → 2, data → 3, training → 4.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid or inconsistent configuration: bad thresholds or grids,
    /// unparseable config files, model/config hash mismatches.
    #[error("config error: {0}")]
    Config(String),

    /// Unusable input data: missing files, malformed manifests, undecodable
    /// or depth-mismatched images, corrupt feature or model files.
    #[error("data error: {0}")]
    Data(String),

    /// Training could not produce a usable model: degenerate classes, solver
    /// non-convergence, or an empty feature mask.
    #[error("training error: {0}")]
    Training(String),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub fn training(msg: impl Into<String>) -> Self {
        Error::Training(msg.into())
    }

    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Data(_) => 3,
            Error::Training(_) => 4,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Data(format!("i/o: {e}"))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
