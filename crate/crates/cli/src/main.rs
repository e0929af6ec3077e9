mod cli;
mod commands;
mod config;
mod serve;

use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use coqex_core::Engine;

use crate::cli::{Cli, Command};
use crate::commands::CliError;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("coqex {}: {e}", cli.command.name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let config = config::resolve(&cli.settings, &config::Env::from_process()).map_err(CliError::input)?;
    // providers are built (and a remote service health-checked) before any work
    let engine = Engine::new(config)?;
    if let Command::Serve { addr, dataset } = &cli.command {
        let fixtures = match dataset {
            Some(path) => commands::dataset_index(path)?,
            None => Default::default(),
        };
        return serve::serve(engine, fixtures, addr);
    }
    let out = commands::run(&cli.command, &engine)?;
    let mut stdout = std::io::stdout().lock();
    stdout
        .write_all(out.as_bytes())
        .and_then(|_| stdout.flush())
        .map_err(|e| CliError { kind: coqex_core::error::ErrorKind::Internal, message: format!("stdout: {e}") })
}
