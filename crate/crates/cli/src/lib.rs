//! Scenario runner for the `slngeo` library.

pub mod commands;
pub mod config;
pub mod error;

pub use error::CliError;
