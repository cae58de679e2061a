use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = groupsnet::cli::Cli::parse();
    match groupsnet::cli::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
