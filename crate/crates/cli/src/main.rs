//! `avex`: command-line interface for the attribute value extraction
//! toolkit. Subcommands mirror the pipeline stages; every command is
//! deterministic under a fixed seed and writes a manifest next to its
//! outputs.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 training
//! divergence.

mod commands;

use clap::error::ErrorKind;
use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();

    let cli = match commands::Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            std::process::exit(code);
        }
    };

    match commands::run(cli) {
        Ok(()) => {}
        Err(err) => {
            eprintln!("error: {err}");
            std::process::exit(commands::exit_code(&err));
        }
    }
}
