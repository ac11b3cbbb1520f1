//! Experiment driver: TOML configuration, run directories and reports.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod svg;

pub use commands::{run, Command};
pub use config::RunConfig;
pub use error::{CliError, CliResult};
