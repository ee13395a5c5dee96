//! `emolyric`: prepare data, train, predict, evaluate, and gradient-check.
//!
//! Exit codes: 0 success, 1 validation or I/O error, 2 numerical failure.

mod commands;
mod config;
mod error;
mod manifest;

use clap::{Parser, Subcommand};

use commands::{evaluate, gradcheck, predict, prepare, train};

#[derive(Debug, Parser)]
#[command(
    name = "emolyric",
    version,
    about = "Multi-label emotion classification for song lyrics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    Prepare(prepare::PrepareArgs),
    Train(Box<train::TrainArgs>),
    Predict(predict::PredictArgs),
    Evaluate(evaluate::EvaluateArgs),
    Gradcheck(gradcheck::GradcheckArgs),
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let result = match cli.command {
        Command::Prepare(a) => prepare::run(a),
        Command::Train(a) => train::run(*a),
        Command::Predict(a) => predict::run(a),
        Command::Evaluate(a) => evaluate::run(a),
        Command::Gradcheck(a) => gradcheck::run(a),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
