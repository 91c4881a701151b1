//! `healthcam`: one binary for every pipeline stage.
//!
//! Exit codes: 0 success, 1 operational failure, 2 usage error.

mod args;
mod data;
mod experiment;
mod inference;
mod run;

use std::io::IsTerminal;
use std::process::ExitCode;

use clap::Parser;

use crate::args::{Cli, Command, StudyKind};
use crate::run::UsageError;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    init_logging(cli.verbose);
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            if err.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn init_logging(verbose: bool) {
    let default = if verbose { "debug" } else { "info" };
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(default));
    let _ = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .with_ansi(std::io::stderr().is_terminal())
        .with_target(false)
        .try_init();
}

fn dispatch(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Synth(a) => data::synth(&a),
        Command::Augment(a) => data::augment(&a),
        Command::Train(a) => experiment::train(&a),
        Command::Eval(a) => experiment::eval(&a),
        Command::Study { kind } => match kind {
            StudyKind::Augmentation(a) => experiment::study_augmentation(&a),
            StudyKind::Architecture(a) => experiment::study_architecture(&a),
        },
        Command::Predict(a) => inference::predict(&a),
        Command::Serve(a) => inference::serve(&a),
    }
}
