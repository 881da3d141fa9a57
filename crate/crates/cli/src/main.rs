//! `poi` command-line interface.
//!
//! Exit status: 0 on success, 1 for usage and configuration errors, 2 for data
//! and format errors, 3 for numerical failures. Failures print a single line
//! `error: <kind>: <message>` on stderr.

mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;
use poi_core::{Error, ErrorCategory};

use args::{Cli, Command};

fn one_line(message: &str) -> String {
    message.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn exit_code(err: &Error) -> u8 {
    match err.category() {
        ErrorCategory::Usage => 1,
        ErrorCategory::Data => 2,
        ErrorCategory::Numerical => 3,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            eprintln!(
                "error: usage: {}",
                one_line(first.trim_start_matches("error: "))
            );
            return ExitCode::from(1);
        }
    };
    let result = match &cli.command {
        Command::Simulate(a) => commands::simulate_cmd(a),
        Command::Detect(a) => commands::detect_cmd(a),
        Command::Fit(a) => commands::fit_cmd(a),
        Command::Cv(a) => commands::cv_cmd(a),
        Command::Study(a) => commands::study_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}: {}", e.kind(), one_line(&e.to_string()));
            ExitCode::from(exit_code(&e))
        }
    }
}
