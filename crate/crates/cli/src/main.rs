use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use cojump_cli::{run, Cli, CliError};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(files) => {
            // a closed pipe on stdout is not an error worth reporting
            let mut out = std::io::stdout().lock();
            for f in files {
                if writeln!(out, "{}", f.display()).is_err() {
                    break;
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            CliError::exit_code(&e)
        }
    }
}
