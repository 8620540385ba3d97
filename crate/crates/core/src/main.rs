use std::process::ExitCode;

use clap::Parser;
use mixmu::cli::{run, Cli, Outcome};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Outcome::Done | Outcome::Certified) => ExitCode::SUCCESS,
        Ok(Outcome::Uncertified) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
