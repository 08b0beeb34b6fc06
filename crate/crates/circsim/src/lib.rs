//! Command-line front end for `circsim-core`: configuration loading,
//! subcommands and CSV/JSON output.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod selftest;

pub use commands::{optimize_parallel, run, Command};
pub use config::{load_config, parse_str, RunConfig};
pub use error::CliError;
pub use output::{write_outputs, RunOutput, Table};
