//! `throughcast`: trace-driven throughput stability analysis, forecasting,
//! and playback simulation.

mod args;
mod commands;
mod config;
mod output;
mod split;

use anyhow::Result;
use clap::Parser;

use args::{Cli, Command};

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Synth(args) => commands::synth(args),
        Command::Analyze(args) => commands::analyze(args),
        Command::Train(args) => commands::train(args),
        Command::Predict(args) => commands::predict(args),
        Command::Eval(args) => commands::eval(args),
        Command::Simulate(args) => commands::simulate(args),
        Command::Report(args) => commands::report(args),
    }
}
