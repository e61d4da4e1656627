use std::process::ExitCode;

use clap::Parser;
use ruingame_cli::{exit, Cli};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let usage = err.use_stderr();
            let _ = err.print();
            return ExitCode::from(if usage { exit::VALIDATION } else { exit::OK });
        }
    };
    ExitCode::from(ruingame_cli::run(&cli))
}
