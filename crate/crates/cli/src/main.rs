use std::process::ExitCode;

use clap::Parser;
use formation_cli::{execute, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("formation: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
