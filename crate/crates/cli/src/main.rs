//! `mtmrf`: schedules, dictionaries, matching and studies from the command line.

mod args;
mod commands;
mod output;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Schedule(a) => args::resolve(cli.config.as_deref(), a).and_then(|(a, c)| commands::schedule(&a, c)),
        Command::Dict(a) => args::resolve(cli.config.as_deref(), a).and_then(|(a, c)| commands::dict(&a, c)),
        Command::Match(a) => args::resolve(cli.config.as_deref(), a).and_then(|(a, c)| commands::match_cmd(&a, c)),
        Command::Study(a) => args::resolve(cli.config.as_deref(), a).and_then(|(a, c)| commands::study(&a, c)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.code)
        }
    }
}
