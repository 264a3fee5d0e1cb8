use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = match calikd_cli::Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Usage errors are validation errors (1), not clap's default 2.
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match calikd_cli::run(&cli) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
