mod args;
mod commands;
mod config;
mod emit;
mod error;
mod report;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};
use config::ConfigFile;
use error::CliError;

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    match cli.command {
        Command::Scaffold(a) => commands::scaffold(&cfg.resolve("scaffold", &a)?),
        Command::Profile(a) => {
            let mut a = cfg.resolve("profile", &a)?;
            a.model = cfg.model(&a.model)?;
            commands::profile(&a)
        }
        Command::Riesz(a) => {
            let mut a = cfg.resolve("riesz", &a)?;
            a.model = cfg.model(&a.model)?;
            commands::riesz(&a)
        }
        Command::Series(a) => {
            let op = a.op;
            let mut a = cfg.resolve("series", &a)?;
            a.op = op;
            commands::series(&a)
        }
        Command::Logderiv(a) => {
            let op = a.op;
            let mut a = cfg.resolve("logderiv", &a)?;
            a.op = op;
            commands::logderiv(&a)
        }
        Command::Ode(a) => {
            let op = a.op;
            let mut a = cfg.resolve("ode", &a)?;
            a.op = op;
            a.model = cfg.model(&a.model)?;
            commands::ode(&a)
        }
        Command::Report(a) => report::report(&a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError::Validation(e.to_string().trim_end().to_string());
            eprintln!("{}", err.to_json());
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
