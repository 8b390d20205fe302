//! Command-line front end for the adversarial-initialization toolkit.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on runtime failures. All
//! runtime failures go to standard error prefixed with `error:`.

use clap::error::ErrorKind;
use malinit::commands;
use clap::{Parser, Subcommand};
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(
    name = "malinit",
    version,
    about = "Adversarial weight-initialization attacks, their statistics, and defenses",
    subcommand_required = true,
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Transform a stored tensor or checkpoint with an initialization attack.
    Attack(commands::attack::AttackArgs),
    /// Closed-form deactivation probabilities over a parameter grid (CSV).
    Analyze(commands::analyze::AnalyzeArgs),
    /// Empirical deactivation frequencies on an attacked layer (CSV).
    Montecarlo(commands::montecarlo::McArgs),
    /// One seeded training run from a JSON config.
    Train(commands::train::TrainArgs),
    /// Many-seed baseline-vs-attack protocol with distribution summaries.
    Experiment(commands::experiment::ExperimentArgs),
    /// Optimization-based knockout for small dense networks.
    Knockout(commands::knockout::KnockoutArgs),
    /// Block-structure detector, heatmaps, and activation report.
    Detect(commands::detect::DetectArgs),
    /// Shuffle remediation: re-permute weights uniformly.
    Undo(commands::undo::UndoArgs),
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Attack(args) => commands::attack::run(args),
        Command::Analyze(args) => commands::analyze::run(args),
        Command::Montecarlo(args) => commands::montecarlo::run(args),
        Command::Train(args) => commands::train::run(args),
        Command::Experiment(args) => commands::experiment::run(args),
        Command::Knockout(args) => commands::knockout::run(args),
        Command::Detect(args) => commands::detect::run(args),
        Command::Undo(args) => commands::undo::run(args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    ExitCode::SUCCESS
                }
                _ => {
                    let _ = e.print();
                    ExitCode::from(1)
                }
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
