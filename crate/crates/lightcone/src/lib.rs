//! Command-line front end for `lightcone-core`: TOML configuration, CSV and
//! JSON outputs, and job-parallel experiment drivers.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod run;

pub use crate::commands::{execute, Command, Invocation};
pub use crate::config::RunConfig;
pub use crate::error::CliError;
