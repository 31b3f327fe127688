use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use foglet::cli::{self, Cli, Command};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if matches!(cli.command, Command::Serve) {
        "info"
    } else {
        "warn"
    };
    cli::init_logging(cli.log_format, level);
    match cli::execute(&cli) {
        Ok(out) => {
            let _ = std::io::stdout().write_all(out.as_bytes());
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("foglet: {}", f.message);
            ExitCode::from(f.code as u8)
        }
    }
}
