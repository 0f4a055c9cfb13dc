//! `tempkb`: preprocess datasets, train and evaluate temporal KB completion
//! models, export score traces and run regularization grids.
//!
//! Exit status: 0 on success, 1 for usage or configuration errors, 2 for
//! runtime failures (I/O, malformed data, divergence).

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tempkb_core::data::{Discretization, Format, Split, SyntheticSizes};

use crate::commands::EvalArgs;
use crate::config::Overrides;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Runtime(tempkb_core::Error),
}

impl From<tempkb_core::Error> for CliError {
    fn from(e: tempkb_core::Error) -> Self {
        match e {
            tempkb_core::Error::InvalidConfig(m) => CliError::Config(m),
            other => CliError::Runtime(other),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "tempkb", version, about = "Temporal knowledge base completion with complex tensor factorizations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Ingest raw tab-separated files into a bundle cache.
    Preprocess {
        #[arg(long)]
        input: PathBuf,
        /// quadruples, intervals or yago.
        #[arg(long, default_value = "quadruples")]
        format: Format,
        /// none, year or bucket:DAYS.
        #[arg(long, default_value = "none")]
        discretization: Discretization,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic low-rank bundle cache.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 5)]
        rank: usize,
        #[arg(long, default_value_t = 50)]
        entities: usize,
        #[arg(long, default_value_t = 10)]
        predicates: usize,
        #[arg(long, default_value_t = 20)]
        timestamps: usize,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train a model; writes checkpoint.bin, train_log.jsonl and config.toml.
    Train {
        #[command(flatten)]
        overrides: Overrides,
        /// Continue from a checkpoint that carries optimizer state.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Filtered ranking metrics of a checkpoint on one split.
    Eval {
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value = "test")]
        split: Split,
        /// Report path (default: <output>/report_<split>.json).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also dump one `s p t gold rank` line per query.
        #[arg(long)]
        rank_dump: Option<PathBuf>,
        /// Seed for timestamps of interval facts (default: the training seed).
        #[arg(long = "query-seed")]
        query_seed: Option<u64>,
        /// Also report the time-axis AUPRC (temporal models only).
        #[arg(long)]
        time_auprc: bool,
    },
    /// Scores over time of (subject, predicate, object) for each object.
    Trace {
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        subject: String,
        #[arg(long)]
        predicate: String,
        #[arg(long = "object", required = true)]
        objects: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train every (rank, lambda, temporal strength) cell and tabulate MRRs.
    Grid {
        #[command(flatten)]
        overrides: Overrides,
        /// Cells trained concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Preprocess { input, format, discretization, out } => {
            commands::preprocess(&input, format, discretization, &out)
        }
        Command::Synth { out, rank, entities, predicates, timestamps, noise, seed } => {
            commands::synth(&out, rank, SyntheticSizes { entities, predicates, timestamps }, noise, seed)
        }
        Command::Train { overrides, resume } => {
            commands::train(&overrides.resolve()?, resume.as_deref()).map(|_| ())
        }
        Command::Eval { overrides, checkpoint, split, out, rank_dump, query_seed, time_auprc } => {
            let args = EvalArgs { checkpoint: &checkpoint, split, out, ranks: rank_dump, seed: query_seed, time_auprc };
            commands::eval(&overrides.resolve()?, args).map(|_| ())
        }
        Command::Trace { overrides, checkpoint, subject, predicate, objects, out } => {
            commands::trace(&overrides.resolve()?, &checkpoint, &subject, &predicate, &objects, &out).map(|_| ())
        }
        Command::Grid { overrides, jobs } => commands::grid(&overrides.resolve()?, jobs).map(|_| ()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
