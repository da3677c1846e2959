//! `noisycan` command-line runner.

mod args;
mod commands;

use std::process::ExitCode;

use args::{Cli, Command};
use clap::Parser;
use commands::Model;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let root = cli.out_root.as_path();
    let result = match &cli.command {
        Command::GenData(a) => commands::gen_data(a, root).map(|_| true),
        Command::Train(a) => commands::train_run(a, Model::Can, root).map(|_| true),
        Command::TrainBaseline(a) => commands::train_run(a, Model::Baseline, root).map(|_| true),
        Command::Eval(a) => commands::eval(a).map(|_| true),
        Command::Gradcheck(a) => commands::gradcheck(a),
        Command::SweepNoise(a) => commands::sweep_noise(a, root).map(|_| true),
        Command::ExportDiag(a) => commands::export_diag(a).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
