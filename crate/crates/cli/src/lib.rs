//! Command-line front end for `dicke-sim`: configuration, subcommands and
//! CSV / JSON / SVG output.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use config::{preset, ModelChoice, RunConfig};
pub use error::{CliError, ConfigError};
