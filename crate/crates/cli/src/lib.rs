//! File formats, run configuration and subcommands of the `crossview`
//! binary.

pub mod atomic;
pub mod bundle;
pub mod commands;
pub mod config;
pub mod error;
pub mod report;

pub use error::{CliError, Result};
