//! The `camo` command-line tool: aggregation, evaluation, sweeps,
//! synthetic data and replayable run manifests.

pub mod cli;
pub mod commands;
pub mod manifest;
pub mod run;

use std::path::Path;

pub use cli::{Cli, Command};
pub use commands::execute;

/// A failed command. Bad input exits with 1, environment failures with 2.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn io(path: &Path, err: std::io::Error) -> Self {
        CliError::Io(format!("{}: {err}", path.display()))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => 1,
            CliError::Io(_) => 2,
        }
    }
}

impl From<camo_core::Error> for CliError {
    fn from(e: camo_core::Error) -> Self {
        if e.is_io() {
            CliError::Io(e.to_string())
        } else {
            CliError::Invalid(e.to_string())
        }
    }
}
