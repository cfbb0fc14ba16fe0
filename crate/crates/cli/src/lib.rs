//! Command-line front end: configuration, on-disk formats and subcommands.

pub mod commands;
pub mod config;
pub mod snapshot;
