use std::process::ExitCode;

use clap::Parser;
use spacesqueeze_cli::cli::Cli;
use spacesqueeze_cli::{commands, exit_code};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
