//! Library side of the `btrf` command-line tool.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;

pub use config::{ReportFormat, RunConfig};
pub use error::{CliError, CliResult};
