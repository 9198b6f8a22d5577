//! Command-line front end for the `atomsim` library.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::ffi::OsString;

use clap::error::ErrorKind as ClapKind;
use clap::Parser;

use args::{Cli, Command};
use error::CliError;

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(a) => commands::simulate::run(a),
        Command::Lyap(a) => commands::lyap::run(a),
        Command::Map(a) => commands::map::run(a),
        Command::Classify(a) => commands::classify::run(a),
        Command::Ensemble(a) => commands::ensemble::run(a),
        Command::Convert(a) => commands::convert::run(a),
    }
}

/// Parse `argv` (program name first) and run the command. Errors are
/// printed to stderr as JSON; the return value is the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ClapKind::DisplayHelp | ClapKind::DisplayVersion) => {
            let _ = e.print();
            return 0;
        }
        Err(e) => return fail(&CliError::usage(e.to_string().trim_end())),
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => fail(&e),
    }
}

fn fail(e: &CliError) -> i32 {
    eprintln!("{}", e.to_json());
    e.exit_code()
}
