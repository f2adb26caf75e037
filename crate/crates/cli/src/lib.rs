//! Command-line front end: `run` takes the full argument vector, so the
//! binary and in-process callers behave identically.

mod commands;
mod options;
mod output;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use options::{Cli, Command};

pub use commands::parse_approx;

pub const EXIT_INFEASIBLE: u8 = 2;

/// Parses `argv` (program name first), runs the command and maps the
/// outcome to 0 (success), 2 (infeasible) or 1 (any other failure).
pub fn run(argv: Vec<String>) -> ExitCode {
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // clap exits with 2 on usage errors, which is reserved for infeasibility here.
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::FAILURE,
            };
        }
    };
    let args = &argv[1..];
    let outcome = match cli.command {
        Command::Gen(a) => commands::gen(&a, args),
        Command::Fit(a) => commands::fit(&a, args),
        Command::Solve(a) => commands::solve(&a, args),
        Command::Validate(a) => commands::validate(&a, args),
        Command::Sweep(a) => commands::sweep(&a, args),
        Command::Bnb(a) => commands::bnb(&a, args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            let infeasible = e.downcast_ref::<hetnet_core::Error>().is_some_and(|c| c.is_infeasible());
            if infeasible {
                eprintln!("infeasible: {e:#}");
                ExitCode::from(EXIT_INFEASIBLE)
            } else {
                eprintln!("error: {e:#}");
                ExitCode::FAILURE
            }
        }
    }
}
