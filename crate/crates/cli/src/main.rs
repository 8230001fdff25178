//! `d3net`: dataset synthesis, training, restoration and benchmarking.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error.

mod args;
mod commands;
mod settings;

use std::process::ExitCode;

use clap::Parser;

use crate::args::{Cli, Command};

/// A failed command, classified for the exit code.
#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }
}

impl From<d3net_core::CoreError> for Failure {
    fn from(e: d3net_core::CoreError) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<d3net_model::ModelError> for Failure {
    fn from(e: d3net_model::ModelError) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.global.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Runtime(format!("cannot configure {n} threads: {e}")))?;
    }
    let g = &cli.global;
    match cli.command {
        Command::Synth(a) => commands::synth(g, a),
        Command::Degrade(a) => commands::degrade(g, a),
        Command::Train(a) => commands::train(g, a),
        Command::Restore(a) => commands::restore(g, a),
        Command::Bench(a) => commands::bench(g, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests print to stdout and succeed.
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
