//! Command-line definitions.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hieval_core::diagnostics::QcThresholds;
use hieval_core::sampler::SamplerConfig;

use crate::commands;
use crate::error::CliResult;
use crate::io::RecordFormat;

#[derive(Debug, Parser)]
#[command(name = "hieval", version, about = "Hierarchical Bayesian analysis of LLM evaluation scores")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model to scored records and write draws, summary and diagnostics.
    Fit(FitArgs),
    /// Rank fitted models by WAIC.
    Compare(CompareArgs),
    /// Forest and trace plots with empirical baselines and t-tests.
    Report(ReportArgs),
    /// Generate a synthetic dataset together with its true effects.
    Simulate(SimulateArgs),
    /// Prior predictive success rates per cell.
    PriorCheck(PriorCheckArgs),
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Records file (CSV, or JSON lines for .jsonl/.ndjson).
    #[arg(long)]
    pub data: PathBuf,
    /// Override the format guessed from the extension.
    #[arg(long, value_parser = parse_format)]
    pub format: Option<RecordFormat>,
    /// Factors defining a cell; defaults to the model's factors and covariates.
    #[arg(long, value_delimiter = ',')]
    pub group_by: Vec<String>,
    /// Keep only the first repeat of every item.
    #[arg(long)]
    pub first_repeat: bool,
}

fn parse_format(s: &str) -> Result<RecordFormat, String> {
    s.parse().map_err(|e: anyhow::Error| e.to_string())
}

#[derive(Debug, Clone, Args)]
pub struct SamplerArgs {
    #[arg(long, default_value_t = 4)]
    pub chains: usize,
    #[arg(long, default_value_t = 2000)]
    pub warmup: usize,
    #[arg(long, default_value_t = 2000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.8)]
    pub target_accept: f64,
    #[arg(long, default_value_t = 10)]
    pub max_tree_depth: usize,
}

impl SamplerArgs {
    pub fn config(&self) -> SamplerConfig {
        SamplerConfig {
            chains: self.chains,
            warmup: self.warmup,
            samples: self.samples,
            seed: self.seed,
            target_accept: self.target_accept,
            max_tree_depth: self.max_tree_depth,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// `builtin:<name>`, a model JSON file or a model config file.
    #[arg(long)]
    pub model: String,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    /// Probability mass of the reported HPDIs.
    #[arg(long, default_value_t = 0.95)]
    pub mass: f64,
    #[arg(long, default_value_t = 1.01)]
    pub max_rhat: f64,
    #[arg(long, default_value_t = 0)]
    pub max_divergences: usize,
    #[arg(long, default_value_t = 400.0)]
    pub min_ess: f64,
    #[arg(long)]
    pub out: PathBuf,
}

impl FitArgs {
    pub fn thresholds(&self) -> QcThresholds {
        QcThresholds {
            max_rhat: self.max_rhat,
            max_divergences: self.max_divergences,
            min_ess: self.min_ess,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    /// Output directories of `hieval fit`.
    #[arg(required = true)]
    pub fits: Vec<PathBuf>,
    /// Treat every Bernoulli trial as an observation (binomial models only).
    #[arg(long)]
    pub per_trial: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scale {
    Logit,
    Prob,
}

impl Scale {
    pub fn as_str(self) -> &'static str {
        match self {
            Scale::Logit => "logit",
            Scale::Prob => "prob",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Imbalance {
    Error,
    Truncate,
    Subsample,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Output directory of `hieval fit`.
    pub fit: PathBuf,
    #[arg(long, value_enum, default_value_t = Scale::Prob)]
    pub scale: Scale,
    #[arg(long, default_value_t = 0.95)]
    pub mass: f64,
    /// Components to plot; defaults to every component with at most 40 elements.
    #[arg(long, value_delimiter = ',')]
    pub components: Vec<String>,
    /// Factors grouping the empirical baseline; defaults to the first indexed level's factors.
    #[arg(long, value_delimiter = ',')]
    pub baseline_by: Vec<String>,
    /// Length reconciliation for paired t-tests.
    #[arg(long, value_enum, default_value_t = Imbalance::Subsample)]
    pub imbalance: Imbalance,
    /// Seed of the paired-test subsample.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Parameters shown in the trace plot; defaults to unindexed scalars.
    #[arg(long, value_delimiter = ',')]
    pub trace: Vec<String>,
    /// Overlap fraction at or above which two intervals are called equivalent.
    #[arg(long, default_value_t = hieval_core::posterior::DEFAULT_EQUIVALENCE)]
    pub equivalence: f64,
    /// Defaults to the fit directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// One model, two domains at about 0.47 and 0.84 with 1257 and 6768 items.
    TwoDomains,
    /// 165 tasks in three difficulty levels, four models, ten repeats.
    Gaia,
    /// Per-task success rates from Beta(0.2, 0.2).
    Bimodal,
    /// Two models, two domains, two subdomains each.
    Nested,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum, conflicts_with = "generator", required_unless_present = "generator")]
    pub preset: Option<Preset>,
    /// Generator JSON file.
    #[arg(long)]
    pub generator: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct PriorCheckArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub model: String,
    /// Prior predictive draws per cell.
    #[arg(long, default_value_t = 1000)]
    pub draws: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Fit(a) => commands::fit::run(&a),
        Command::Compare(a) => commands::compare::run(&a),
        Command::Report(a) => commands::report::run(&a),
        Command::Simulate(a) => commands::simulate::run(&a),
        Command::PriorCheck(a) => commands::prior_check::run(&a),
    }
}
