mod cli;
mod commands;
mod config;
mod error;
mod experiment;
mod io;

use std::process::ExitCode;

use clap::FromArgMatches;

use crate::cli::{Cli, Command};
use crate::error::{CliError, CliResult};

fn main() -> ExitCode {
    match run(std::env::args().collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(argv: Vec<String>) -> CliResult<()> {
    let cmd = cli::command();
    let argv = config::expand(argv, &cmd)?;
    let matches = match cmd.try_get_matches_from(argv) {
        Ok(m) => m,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    Ok(())
                }
                _ => {
                    eprint!("{}", e.render().ansi());
                    Err(CliError::Usage("invalid arguments".into()))
                }
            };
        }
    };
    let cli = Cli::from_arg_matches(&matches).map_err(|e| CliError::Usage(e.to_string()))?;
    match cli.workers {
        Some(0) => Err(CliError::Usage("--workers must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Usage(format!("cannot start {n} workers: {e}")))?
            .install(|| dispatch(cli.command)),
        None => dispatch(cli.command),
    }
}

fn dispatch(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Simulate(a) => commands::simulate(a),
        Command::Estimate(a) => commands::estimate(a),
        Command::Theory(c) => commands::theory(c),
        Command::Extremal(c) => commands::extremal(c),
        Command::Diagnose(a) => commands::diagnose(a),
        Command::Experiment(a) => experiment::experiment(a),
    }
}
