//! Configuration parsing, command dispatch and CSV output for the `bandtrace` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::{run_command, Command};
pub use config::{parse_config, RunConfig};
pub use error::{CliError, Result};
pub use output::{Artifacts, Table};
