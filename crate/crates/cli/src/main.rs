//! `ee`: expected-exploitability pipeline driver.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use chrono::NaiveDate;
use clap::{Parser, Subcommand};
use serde::Serialize;

use config::{Overrides, RunConfig};
use manifest::Run;

/// Expected exploitability: corpus ingestion, featurization, noise-robust
/// training and time-aware evaluation.
///
/// Settings come from defaults, then `--config <file.json>`, then flags.
/// Outputs are written to the output directory as
/// `<subcommand>.<confighash>.<ext>` next to a manifest recording the
/// configuration, input hashes and format versions. Set RUST_LOG to change
/// the log level.
#[derive(Parser, Debug)]
#[command(name = "ee", version)]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
enum Command {
    /// Load and validate a corpus; write per-file diagnostics and lifecycle
    /// estimates (disclosure, exploit date, label).
    Ingest,
    /// Train the PoC language-identification model.
    LangidTrain {
        /// JSON-Lines file of {"content": ..., "label": <language slug>};
        /// generated files are used when absent.
        #[arg(long)]
        labeled: Option<PathBuf>,
        /// Number of generated files when no labeled file is given.
        #[arg(long, default_value_t = 1000)]
        n_synthetic: usize,
    },
    /// Build per-split vocabularies and training design matrices.
    Featurize,
    /// Train one model per temporal split.
    Train,
    /// Score one vulnerability at a date with the latest model trained
    /// before it; prints one JSON line.
    Score {
        #[arg(long)]
        cve: String,
        #[arg(long)]
        date: NaiveDate,
    },
    /// Score every test vulnerability at the configured offsets after
    /// disclosure and report ROC/PR, prioritization error and time-varying
    /// AUC. Uses `--models` when given, otherwise trains first.
    Evaluate,
    /// Compare a pristine model with models trained after relabeling every
    /// positive carrying a feature as negative.
    NoiseSim {
        /// Feature whose positives are relabeled (cwe:<id> or cpe:<product>).
        #[arg(long)]
        feature: String,
        /// Losses trained under noise.
        #[arg(long, value_delimiter = ',', default_value = "bce,lr,fc,ffc")]
        losses: Vec<String>,
    },
    /// Chi-squared independence tests between evidence sources and
    /// vulnerability features, Bonferroni corrected.
    Chi2,
    /// Generate a synthetic corpus with known ground truth into the output
    /// directory (vulns.jsonl, artifacts.jsonl, evidence.jsonl, trace.json).
    SynthGen,
    /// Summarize an `evaluate` output as Markdown and CSV tables.
    Report {
        /// The `evaluate.<hash>.json` file.
        #[arg(long)]
        input: PathBuf,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Ingest => "ingest",
            Command::LangidTrain { .. } => "langid-train",
            Command::Featurize => "featurize",
            Command::Train => "train",
            Command::Score { .. } => "score",
            Command::Evaluate => "evaluate",
            Command::NoiseSim { .. } => "noise-sim",
            Command::Chi2 => "chi2",
            Command::SynthGen => "synth-gen",
            Command::Report { .. } => "report",
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = RunConfig::resolve(&cli.overrides)?;
    let run = Run::new(cli.command.name(), &cli.command, &cfg)?;
    match &cli.command {
        Command::Ingest => commands::ingest(&cfg, run),
        Command::LangidTrain { labeled, n_synthetic } => {
            commands::langid_train(&cfg, labeled.as_deref(), *n_synthetic, run)
        }
        Command::Featurize => commands::featurize(&cfg, run),
        Command::Train => commands::train(&cfg, run),
        Command::Score { cve, date } => commands::score(&cfg, cve, *date, run),
        Command::Evaluate => commands::evaluate(&cfg, run),
        Command::NoiseSim { feature, losses } => commands::noise_sim(&cfg, feature, losses, run),
        Command::Chi2 => commands::chi2(&cfg, run),
        Command::SynthGen => commands::synth_gen(&cfg, run),
        Command::Report { input } => commands::report(input, run),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
