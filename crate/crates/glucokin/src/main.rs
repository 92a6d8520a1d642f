use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let args = glucokin::cli::Cli::parse();
    match glucokin::cli::run(args) {
        Ok(outcome) => outcome.exit_code(),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(glucokin::cli::EXIT_INVALID)
        }
    }
}
