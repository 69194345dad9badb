use std::io;
use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = kvote_cli::Cli::parse();
    let stdout = io::stdout();
    match kvote_cli::run(&cli, &mut stdout.lock()) {
        Ok(outcome) => ExitCode::from(outcome.exit_code() as u8),
        Err(e) => {
            eprintln!("kvote: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
