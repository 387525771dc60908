//! Command-line front end: time-tag file formats, run configuration,
//! reports and the `entlink` subcommands.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod report;
pub mod tagfile;

use std::ffi::OsString;
use std::io::Write;

use clap::Parser;

pub use args::{Cli, Command};
pub use config::{ReportFormat, RunConfig};
pub use error::CliError;
pub use tagfile::{read_stream, write_stream, TagFileError, TagFormat};

/// Loads the config named by `--config` (or the environment) and applies
/// command-line overrides.
pub fn effective_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cli.apply(&mut config);
    Ok(config)
}

pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let config = effective_config(cli)?;
    match &cli.command {
        Command::Simulate(_) => commands::cmd_simulate(&config, out).map(drop),
        Command::Pipeline(_) => commands::cmd_pipeline(&config, out).map(drop),
        Command::Keyrate(_) => commands::cmd_keyrate(&config, out).map(drop),
        Command::Pass(_) => commands::cmd_pass(&config, out).map(drop),
        Command::Convert { input, output } => commands::cmd_convert(input, output, out),
        Command::ShowConfig => {
            write!(out, "{}", config.to_toml()).map_err(|e| CliError::Report(e.to_string()))
        }
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                error::EXIT_USAGE
            } else {
                error::EXIT_OK
            };
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match execute(&cli, &mut lock) {
        Ok(()) => error::EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
