//! Error type shared by all modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Input shapes or parameters are inconsistent (dimension mismatch,
    /// ħ outside (0,1], empty grids, off-lattice shifts, …).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A numerical procedure failed to converge within its budget.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Configuration / descriptor problems (schema violations, unresolved
    /// symbol names, …).
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
