//! Command-line front end for population control of a noisy two-level
//! system: pulse synthesis, simulation, feasibility maps and thermal bounds.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod parallel;
pub mod svg;
pub mod verify;

use clap::Parser;

pub use config::{Cli, Command, Flags, RunConfig};
pub use error::{CliError, EXIT_INFEASIBLE, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE};

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code. Diagnostics go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = RunConfig::resolve(cli.command, cli.flags).and_then(|cfg| commands::run(&cfg));
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("popctl {}: {e}", cli.command.name());
            e.exit_code()
        }
    }
}
