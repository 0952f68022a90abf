use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    match bee::cli::execute(bee::cli::Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
