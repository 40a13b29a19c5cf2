//! Experiment runner for the integrated sensing and semantic communication
//! library: configuration loading, the five CLI modes, and result emission.

pub mod config;
pub mod runner;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] issc_core::IsscError),
}

impl CliError {
    /// Process exit code for this error (2 = config/usage, 1 = other).
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}
