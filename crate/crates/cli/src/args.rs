use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use dynjudge::selector::CandidateCount;

#[derive(Debug, Parser)]
#[command(name = "dynjudge", version, about = "Template-guided adjudication of rule-intensive queries")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Use the scripted provider with this script file.
    #[arg(long, global = true, value_name = "FILE", conflicts_with = "endpoint")]
    pub script: Option<PathBuf>,
    /// Use the HTTP provider at this base URL.
    #[arg(long, global = true, value_name = "URL")]
    pub endpoint: Option<String>,
    /// Environment variable holding the provider bearer token.
    #[arg(long, global = true, value_name = "VAR")]
    pub auth_env: Option<String>,
    /// Maximum number of in-flight provider calls.
    #[arg(long, global = true, value_name = "N", value_parser = clap::value_parser!(u32).range(1..))]
    pub concurrency: Option<u32>,
    /// Ignore unknown fields in input files instead of rejecting them.
    #[arg(long, global = true)]
    pub lenient: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a template library: seeds, continuation, style transfer, filtering.
    BuildLibrary(BuildLibraryArgs),
    /// Mine winner/loser template pairs from per-query score records.
    BuildPairs(BuildPairsArgs),
    /// Train the pairwise preference scorer.
    TrainSelector(TrainSelectorArgs),
    /// Pick a template for one query and print every candidate score.
    Select(SelectArgs),
    /// Run the full reasoning pipeline on one query.
    Adjudicate(AdjudicateArgs),
    /// Run a benchmark and write the report, predictions and traces.
    Evaluate(EvaluateArgs),
    /// Run one benchmark per point of an ablation plan.
    Ablate(AblateArgs),
    /// Write the synthetic fixtures.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct BuildLibraryArgs {
    /// Task context text file.
    #[arg(long, value_name = "FILE")]
    pub context: PathBuf,
    /// Dataset, JSONL of queries.
    #[arg(long, value_name = "FILE")]
    pub dataset: PathBuf,
    /// Rule set JSON.
    #[arg(long, value_name = "FILE")]
    pub rules: PathBuf,
    /// Number of seed templates.
    #[arg(short = 'm', long = "seeds", value_name = "M")]
    pub m: Option<usize>,
    /// Prefix length in steps for continuation.
    #[arg(short = 'k', long = "prefix", value_name = "K")]
    pub k: Option<usize>,
    /// Style variants per template.
    #[arg(short = 'v', long = "variants", value_name = "V")]
    pub v: Option<usize>,
    /// Fraction of the dataset used to evaluate templates.
    #[arg(short = 'r', long = "ratio", value_name = "R")]
    pub r: Option<f64>,
    /// Minimum partial accuracy for a template to be retained.
    #[arg(long, value_name = "THETA")]
    pub theta: Option<f64>,
    /// Seed for subset sampling.
    #[arg(long, value_name = "S")]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BuildPairsArgs {
    /// Per-query score records, JSONL.
    #[arg(long, value_name = "FILE")]
    pub scores: PathBuf,
    /// Queries the records refer to, JSONL.
    #[arg(long, value_name = "FILE")]
    pub queries: PathBuf,
    /// Cap on pairs kept per category.
    #[arg(long, value_name = "N")]
    pub pairs_per_category: Option<usize>,
    #[arg(long, value_name = "S")]
    pub seed: Option<u64>,
    /// Output pairs file, JSONL.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainSelectorArgs {
    /// Preference pairs, JSONL.
    #[arg(long, value_name = "FILE")]
    pub pairs: PathBuf,
    /// Queries the pairs refer to, JSONL.
    #[arg(long, value_name = "FILE")]
    pub queries: PathBuf,
    /// Template library JSON.
    #[arg(long, value_name = "FILE")]
    pub library: Option<PathBuf>,
    /// Temperature of the pairwise loss.
    #[arg(long, value_name = "BETA")]
    pub beta: Option<f64>,
    #[arg(long, value_name = "N")]
    pub epochs: Option<usize>,
    #[arg(long, value_name = "S")]
    pub seed: Option<u64>,
    #[arg(long, value_name = "LR")]
    pub learning_rate: Option<f64>,
    /// Pairs per gradient step; 0 means the full batch.
    #[arg(long, value_name = "N")]
    pub batch_size: Option<usize>,
    /// Hashed feature dimension, a power of two.
    #[arg(long, value_name = "D")]
    pub feature_dim: Option<usize>,
    /// Output parameter file, JSON.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

/// Library, global records and local scorer used to pick templates.
#[derive(Debug, Args)]
pub struct SelectorArgs {
    /// Template library JSON.
    #[arg(long, value_name = "FILE")]
    pub library: Option<PathBuf>,
    /// Per-template evaluation records, JSON.
    #[arg(long, value_name = "FILE")]
    pub records: Option<PathBuf>,
    /// Weight of the global score against the local score.
    #[arg(long, value_name = "LAMBDA")]
    pub lambda: Option<f64>,
    /// Candidate templates kept by global score: `all` or a count.
    #[arg(long, value_name = "all|N")]
    pub candidates: Option<CandidateCount>,
    /// Trained preference parameters; replaces the provider's NLL as local score.
    #[arg(long, value_name = "FILE")]
    pub params: Option<PathBuf>,
    /// Softmax temperature applied to preference scores.
    #[arg(long, value_name = "BETA", requires = "params")]
    pub beta: Option<f64>,
}

/// Stage switches layered over the configured stages.
#[derive(Debug, Args)]
pub struct StageArgs {
    /// Skip evidence gathering and adjudication.
    #[arg(long)]
    pub no_evidence: bool,
    /// Skip adjudication.
    #[arg(long)]
    pub no_adjudication: bool,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    /// Query JSON file.
    #[arg(long, value_name = "FILE")]
    pub query: PathBuf,
    #[command(flatten)]
    pub selector: SelectorArgs,
}

#[derive(Debug, Args)]
pub struct AdjudicateArgs {
    /// Query JSON file.
    #[arg(long, value_name = "FILE", required_unless_present = "stdin", conflicts_with = "stdin")]
    pub query: Option<PathBuf>,
    /// Read the query JSON from standard input.
    #[arg(long)]
    pub stdin: bool,
    /// Rule set JSON.
    #[arg(long, value_name = "FILE")]
    pub rules: PathBuf,
    #[command(flatten)]
    pub selector: SelectorArgs,
    #[command(flatten)]
    pub stages: StageArgs,
    /// Write the full pipeline trace here.
    #[arg(long, value_name = "OUT.json")]
    pub trace: Option<PathBuf>,
    /// Record stage durations in the trace.
    #[arg(long)]
    pub timings: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Dataset, JSONL of queries with gold sets.
    #[arg(long, value_name = "FILE")]
    pub dataset: PathBuf,
    /// Rule set JSON.
    #[arg(long, value_name = "FILE")]
    pub rules: PathBuf,
    #[command(flatten)]
    pub selector: SelectorArgs,
    #[command(flatten)]
    pub stages: StageArgs,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    /// Ablation plan JSON: `{"lambdas": [...]}`, `{"candidate_counts": [...]}` or `{"stage_grid": [...]}`.
    #[arg(long, value_name = "FILE")]
    pub plan: PathBuf,
    /// Dataset, JSONL of queries with gold sets.
    #[arg(long, value_name = "FILE")]
    pub dataset: PathBuf,
    /// Rule set JSON.
    #[arg(long, value_name = "FILE")]
    pub rules: PathBuf,
    #[command(flatten)]
    pub selector: SelectorArgs,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}
