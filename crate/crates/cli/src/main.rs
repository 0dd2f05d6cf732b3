//! `nat`: run the architecture search, reproduce the benchmark studies and
//! analyse saved archives.
//!
//! Exit codes: 0 on success, 2 for configuration or input errors, 3 when an
//! evaluator or the run itself fails.

mod artifacts;
mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{AnalyzeArgs, BenchArgs, BenchProblem, SearchArgs};

pub enum Failure {
    Input(anyhow::Error),
    Runtime(anyhow::Error),
}

#[derive(Parser)]
#[command(name = "nat", version = artifacts::VERSION, about = "Surrogate-assisted many-objective architecture search")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the search loop and write its artifacts.
    Search {
        /// JSON run configuration.
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Concurrent evaluator calls (worker processes for external evaluators).
        #[arg(long, default_value_t = 1)]
        parallel_evals: usize,
    },
    /// Reproduce a benchmark study.
    Bench {
        #[arg(long, value_enum)]
        problem: BenchProblem,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Objective count for dtlz1; all of 3, 5, 10 and 15 when omitted.
        #[arg(long)]
        objectives: Option<usize>,
        #[arg(long, default_value_t = 31)]
        runs: usize,
        /// Generations per dtlz1 run.
        #[arg(long, default_value_t = 400)]
        generations: usize,
        /// True evaluations per rosenbrock run.
        #[arg(long, default_value_t = 60)]
        budget: usize,
    },
    /// Inspect an archive: front, hypervolume and trade-off decision.
    Analyze {
        #[arg(long)]
        archive: PathBuf,
        /// Hypervolume reference point, comma separated.
        #[arg(long, allow_hyphen_values = true)]
        ref_point: Option<String>,
        /// Directory for front.csv and analysis.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// The error chain on one line, skipping causes already spelled out by
/// their parent's message.
fn render(e: &anyhow::Error) -> String {
    let mut text = String::new();
    for cause in e.chain() {
        let msg = cause.to_string();
        if !text.contains(&msg) {
            if !text.is_empty() {
                text.push_str(": ");
            }
            text.push_str(&msg);
        }
    }
    text
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Search {
            config,
            seed,
            out,
            parallel_evals,
        } => commands::search(&SearchArgs {
            config,
            seed,
            out,
            parallel_evals,
        }),
        Command::Bench {
            problem,
            seed,
            out,
            objectives,
            runs,
            generations,
            budget,
        } => commands::bench(&BenchArgs {
            problem,
            seed,
            out,
            objectives,
            runs,
            generations,
            budget,
        }),
        Command::Analyze { archive, ref_point, out } => commands::analyze(&AnalyzeArgs { archive, ref_point, out }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {}", render(&e));
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {}", render(&e));
            ExitCode::from(3)
        }
    }
}
