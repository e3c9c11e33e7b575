mod args;
mod commands;
mod session;

use std::process::ExitCode;

use clap::Parser;

use crate::args::{Cli, Command};
use crate::session::{CliError, Session};

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.global.jobs).build_global() {
        eprintln!("fluxkit: cannot start worker pool: {e}");
        return ExitCode::from(1);
    }
    let result = match &cli.command {
        Command::Replay(r) => commands::replay(r),
        _ => execute(cli, argv),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fluxkit: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

/// Run one parsed command line and write its manifest.
pub(crate) fn execute(cli: Cli, argv: Vec<String>) -> Result<(), CliError> {
    let mut session = Session::open(&cli.global, argv)?;
    let name = commands::dispatch(&cli.command, &mut session)?;
    session.finish(&name)
}
