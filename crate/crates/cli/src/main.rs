use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use ssncert_cli::error::{EXIT_MALFORMED, EXIT_OK};
use ssncert_cli::{execute, write_report, Cli};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_MALFORMED,
            };
            return exit(code);
        }
    };
    let outcome = match execute(&cli.command) {
        Ok(outcome) => outcome,
        Err(e) => {
            eprintln!("ssncert: {e}");
            return exit(e.exit_code());
        }
    };
    if let Err(e) = write_report(&outcome.report, cli.command.out()) {
        eprintln!("ssncert: {e}");
        return exit(e.exit_code());
    }
    for line in &outcome.diagnostics {
        eprintln!("ssncert: {line}");
    }
    exit(outcome.exit_code)
}

fn exit(code: i32) -> ExitCode {
    ExitCode::from(u8::try_from(code).unwrap_or(1))
}
