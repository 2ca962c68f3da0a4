use std::process::ExitCode;

use clap::Parser;
use qgeom_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) => {
            for f in &outcome.files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("qgeom {}: {e}", cli.command.name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
