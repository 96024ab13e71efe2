//! `gauss-mlc`: seeded experiments on robust multiclass linear
//! classification under Gaussian marginals.
//!
//! Exit status: 0 on success, 2 when the configuration is rejected (nothing
//! is written), 3 when a run fails.

mod args;
mod output;
mod spec;
mod tools;
mod train;

use std::process::ExitCode;

use clap::Parser;
use thiserror::Error;

use args::{Cli, Command};

#[derive(Debug, Error)]
pub enum Failure {
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("{0:#}")]
    Runtime(#[from] anyhow::Error),
}

impl From<gauss_mlc::Error> for Failure {
    fn from(e: gauss_mlc::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

impl Failure {
    pub fn invalid(e: impl std::fmt::Display) -> Self {
        Failure::Invalid(e.to_string())
    }

    fn exit_code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Invalid("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Runtime(e.into()))?;
    }
    let global = &cli.global();
    match &cli.command {
        Command::GenData(a) => tools::gen_data(global, a),
        Command::Train(a) => train::train(global, a),
        Command::Eval(a) => tools::eval(global, a),
        Command::Geometry(a) => tools::geometry(global, a),
        Command::Lowerbound(a) => tools::lowerbound(global, a),
        Command::LemmaLab(a) => tools::lemma_lab(global, a),
        Command::Compare(a) => train::compare(global, a),
    }
}
