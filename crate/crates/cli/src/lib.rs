//! Command-line front end: `estimate`, `simulate`, `coverage` and `bootstrap`.
//!
//! Exit codes: 0 on success, 2 for malformed input or configuration, 3 when
//! an estimator or solver fails. Nothing is written when a run fails.

pub mod commands;
pub mod config;
pub mod error;
pub mod format;
pub mod io;

use std::ffi::OsString;

use clap::Parser;

use config::{Cli, CommandKind, RunConfig};
pub use error::{CliError, CliResult};

/// Parses `args`, runs the command, reports errors on stderr and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: Cli) -> CliResult<()> {
    let (kind, opts) = cli.command.split();
    let cfg = RunConfig::resolve(kind, opts, cli.config.as_deref())?;
    if cli.config_dump {
        print!("{}", cfg.to_toml()?);
        return Ok(());
    }
    match kind {
        CommandKind::Estimate => commands::estimate(&cfg),
        CommandKind::Simulate | CommandKind::Coverage => commands::simulate(&cfg),
        CommandKind::Bootstrap => commands::bootstrap(&cfg),
    }
}
