mod args;
mod commands;
mod config;
mod error;
mod output;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command, Global};
use error::CliError;

fn run(cli: Cli) -> Result<(), CliError> {
    let file = config::load(cli.global.config.as_deref())?;
    let global: Global = config::resolve(&cli.global, &file, cli.command.name())?;
    if let Some(n) = global.threads {
        if n == 0 {
            return Err(CliError::Invalid("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Failed(e.to_string()))?;
    }
    let name = cli.command.name();
    match &cli.command {
        Command::Bounds(a) => commands::bounds(&global, config::resolve(a, &file, name)?),
        Command::SosVerify(a) => commands::sos_verify(&global, config::resolve(a, &file, name)?),
        Command::Simulate(a) => commands::simulate(&global, config::resolve(a, &file, name)?),
        Command::Robustness(a) => commands::robustness(&global, config::resolve(a, &file, name)?),
        Command::Randomness(a) => commands::randomness(&global, config::resolve(a, &file, name)?),
        Command::BoundCurve(a) => commands::bound_curve(&global, config::resolve(a, &file, name)?),
        Command::AppParams(a) => commands::app_params(&global, config::resolve(a, &file, name)?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
