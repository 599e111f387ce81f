use std::process::ExitCode;

use clap::Parser;
use partlin_cli::Cli;

fn main() -> ExitCode {
    ExitCode::from(partlin_cli::run(&Cli::parse()))
}
