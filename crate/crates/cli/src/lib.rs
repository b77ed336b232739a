//! Configuration loading and experiment orchestration for the `gem` binary.
//!
//! The library half exists so integration tests can drive the same code the
//! binary runs: [`config::load_config`] turns a flat `key = value` file into
//! an [`config::ExperimentConfig`], and [`experiment::run_experiment`]
//! executes it and writes the CSV/report artifacts.

pub mod config;
pub mod experiment;

use thiserror::Error;

/// Anything the binary can fail with, carrying its process exit code.
///
/// The contract: 1 for configuration or validation failures, 2 for numerical
/// failures inside a run, 3 for I/O failures.
#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] config::ConfigError),
    #[error(transparent)]
    Experiment(#[from] experiment::ExperimentError),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(e) => e.exit_code(),
            CliError::Experiment(e) => e.exit_code(),
            CliError::Usage(_) => 1,
        }
    }
}
