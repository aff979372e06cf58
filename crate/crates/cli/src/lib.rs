//! Experiment driver behind the `nuecls` binary.
//!
//! Each subcommand resolves an [`config::ExperimentConfig`], writes it to
//! `resolved_config.json` in the output directory, and then produces its
//! tables, reports and plots there.

pub mod commands;
pub mod config;
pub mod report;
pub mod svg;

use std::fmt;

pub use config::{resolve, Cli, ExperimentConfig};

pub const RESOLVED_CONFIG: &str = "resolved_config.json";

/// A problem with the invocation or configuration (exit code 2).
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Debug)]
pub enum CliError {
    Usage(UsageError),
    Internal(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Internal(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(e) => write!(f, "{e}"),
            CliError::Internal(e) => write!(f, "{e:#}"),
        }
    }
}

impl From<UsageError> for CliError {
    fn from(e: UsageError) -> Self {
        CliError::Usage(e)
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Internal(e)
    }
}

impl From<nuecls_core::Error> for CliError {
    fn from(e: nuecls_core::Error) -> Self {
        CliError::Internal(e.into())
    }
}

/// Resolves the configuration and runs the selected subcommand.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = resolve(cli)?;
    match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Internal(e.into()))?
            .install(|| commands::dispatch(&cfg)),
        None => commands::dispatch(&cfg),
    }
}
