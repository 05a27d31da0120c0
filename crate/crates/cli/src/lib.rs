//! Configuration, run directories and command dispatch for the `dualflow`
//! binary.

pub mod commands;
pub mod config;

pub use commands::{run_command, Command, CommandRegistry, RunDir, RunOutcome, Status, Summary};
pub use config::{parse_config, parse_with_overrides, RunConfig};
