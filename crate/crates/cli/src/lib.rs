//! File formats and commands behind the `myoinr` binary.

pub mod checkpoint;
pub mod cli;
pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod overlay;
pub mod payload;
pub mod report;

pub use error::{CliError, CliResult};
