//! File formats, experiment configs and the `disco` command line on top of
//! [`disco_core`].
//!
//! - [`dataset`]: numeric CSV datasets
//! - [`params_io`]: versioned text format for trained parameters
//! - [`config`]: TOML experiment configs and their hash
//! - [`report`]: CSV and JSON outputs
//! - [`commands`]: `toy`, `train`, `eval`, `gradcheck`, `sweep`
//! - [`cli`]: argument parsing and exit codes

pub mod cli;
pub mod commands;
pub mod config;
pub mod dataset;
mod error;
pub mod params_io;
pub mod report;

pub use error::{CliError, CliResult};
