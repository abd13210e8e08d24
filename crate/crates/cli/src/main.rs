mod args;
mod commands;
mod output;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match &cli.command {
        Command::Throughput(a) => commands::throughput(a).map(|()| true),
        Command::Delay(a) => commands::delay(a).map(|()| true),
        Command::Oracle(a) => commands::oracle(a).map(|()| true),
        Command::Simulate(a) => commands::simulate(a).map(|()| true),
        Command::Compare(a) => commands::compare(a).map(|()| true),
        Command::Validate(a) => commands::validate(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
