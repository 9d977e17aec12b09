//! `easyfs` command-line tool.
//!
//! Exit codes: 0 on success, 1 for data or compute errors, 2 for usage errors.

mod args;
mod commands;
mod manifest;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

/// How a run failed, which decides the exit code.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(anyhow::Error),
}

impl Failure {
    pub fn usage(msg: impl Into<String>) -> Self {
        Failure::Usage(msg.into())
    }
}

impl From<easyfs::Error> for Failure {
    fn from(e: easyfs::Error) -> Self {
        Failure::Data(e.into())
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Data(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Data(e.into())
    }
}

pub type Outcome<T = ()> = Result<T, Failure>;

fn configure_threads(threads: Option<usize>) -> Outcome {
    let Some(n) = threads else { return Ok(()) };
    if n == 0 {
        return Err(Failure::usage("--threads must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Data(e.into()))
}

fn run(cli: Cli) -> Outcome {
    configure_threads(cli.threads)?;
    match cli.command {
        Command::Select(a) => commands::select(a),
        Command::Eval(a) => commands::eval(a),
        Command::OracleCheck(a) => commands::oracle_check(a),
        Command::Bench(a) => commands::bench(a),
    }
}

fn main() -> ExitCode {
    // clap prints its own message and exits with 2 on bad usage
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
