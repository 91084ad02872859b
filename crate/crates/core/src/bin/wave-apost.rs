use std::process::ExitCode;

use clap::Parser;
use wave_apost::cli::{execute, Cli};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    ExitCode::from(execute(&Cli::parse()))
}
