//! `dbv`: optimise, sweep and simulate distance-bounding verification.

mod args;
mod commands;
mod format;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use crate::args::{Cli, Command};
use crate::commands::CliError;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let result = match cli.command {
        Command::Optimize(a) => commands::optimize(&a),
        Command::Curves(a) => commands::curves(&a),
        Command::Simulate(a) => commands::simulate(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                CliError::Usage(_) => 1,
                CliError::Infeasible { .. } => 2,
                CliError::Internal(_) => 3,
            })
        }
    }
}
