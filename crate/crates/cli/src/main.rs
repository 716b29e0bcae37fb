use std::process::ExitCode;

use clap::Parser;
use salbench_cli::{run, Cli};

fn main() -> ExitCode {
    // Help and version output go through clap's own exit path.
    let cli = Cli::parse();
    match run(cli) {
        Ok(line) => {
            if !line.is_empty() {
                println!("{line}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("salbench: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
