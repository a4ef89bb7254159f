use clap::Parser;
use qmk_cli::{run, write_output, Cli};
use std::process::ExitCode;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match run(&cli.command) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    if let Err(e) = write_output(&outcome, cli.command.common().output.as_deref()) {
        eprintln!("error: {e}");
        return ExitCode::from(e.exit_code() as u8);
    }
    if outcome.converged {
        ExitCode::SUCCESS
    } else {
        eprintln!("error: solver did not converge; partial report written");
        ExitCode::from(3)
    }
}
