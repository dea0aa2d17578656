use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

pub const OUT_ENV: &str = "TRIADIC_OUT";

#[derive(Debug, Parser)]
#[command(name = "triadic", version, about = "Link prediction on signed, directed social networks")]
pub struct Cli {
    /// Output directory [env: TRIADIC_OUT, default: triadic-out]
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Invocation,
}

#[derive(Debug, Subcommand)]
pub enum Invocation {
    #[command(flatten)]
    Run(Command),
    /// Run a command described by a JSON config file (same schema as the
    /// `command` field of a run manifest)
    Config { file: PathBuf },
    /// Repeat the run recorded in a manifest
    Rerun { manifest: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Relationship, 2-path and prosociality statistics
    Stats(StatsArgs),
    /// Triadic influence of every declared relationship
    Influence(InputArgs),
    /// Train the one-hidden-layer classifier on local predictors
    TrainLocal(TrainLocalArgs),
    /// Probability curves and surfaces of trained ensembles
    Curves(CurvesArgs),
    /// Biased random walks and node embeddings
    Embed(EmbedArgs),
    /// Embedding-based deep net or forest under treatment I or II
    TrainGlobal(TrainGlobalArgs),
    /// Generate a synthetic network
    Simulate(SimulateArgs),
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct InputArgs {
    /// Nodes CSV
    #[arg(long)]
    pub nodes: PathBuf,
    /// Edges CSV
    #[arg(long)]
    pub edges: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct StatsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// friend = {+2}, enemy = {-1, -2}
    Strict,
    /// friend = {+1, +2}, enemy = {-1, -2}
    Merged,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct LocalTraining {
    #[arg(long, value_enum, default_value = "strict")]
    pub scheme: Scheme,
    /// Models per predictor set
    #[arg(long, default_value_t = 10)]
    pub seeds: usize,
    /// Base seed; model seeds are derived from it
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 200)]
    pub steps: usize,
    #[arg(long, default_value_t = 100)]
    pub hidden: usize,
    #[arg(long, default_value_t = 0.1)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.99)]
    pub lr_decay: f64,
    #[arg(long, default_value_t = 20)]
    pub minibatch: usize,
    /// Oscillating class weights (amplitude 10, period 5)
    #[arg(long)]
    pub dynamical: bool,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct TrainLocalArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub training: LocalTraining,
    /// Predictor sets for relationships with at least one 2-path
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "influence_and_traits,influence_only,traits_only,prosociality_only"
    )]
    pub predictors: Vec<String>,
    /// Predictor sets for isolated relationships (cross-validated); pass an
    /// empty string to skip
    #[arg(long, value_delimiter = ',', default_value = "traits_only,prosociality_only")]
    pub isolated_predictors: Vec<String>,
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct CurvesArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub training: LocalTraining,
    #[arg(long, default_value_t = -10.0, allow_negative_numbers = true)]
    pub min_influence: f64,
    #[arg(long, default_value_t = 40.0, allow_negative_numbers = true)]
    pub max_influence: f64,
    #[arg(long, default_value_t = 51)]
    pub points: usize,
    /// Use every relationship for the prosociality surface instead of only
    /// those with a 2-path
    #[arg(long)]
    pub surface_all: bool,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct WalkArgs {
    #[arg(long, default_value_t = 1.0)]
    pub p: f64,
    #[arg(long, default_value_t = 4.0)]
    pub q: f64,
    #[arg(long, default_value_t = 420)]
    pub walks_per_node: usize,
    #[arg(long, default_value_t = 30)]
    pub walk_length: usize,
    #[arg(long, default_value_t = 128)]
    pub dimension: usize,
    #[arg(long, default_value_t = 10)]
    pub window: usize,
    #[arg(long, default_value_t = 5)]
    pub negatives: usize,
    #[arg(long, default_value_t = 5)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.025)]
    pub learning_rate: f64,
    /// Lock-free parallel skip-gram; faster but not reproducible
    #[arg(long)]
    pub hogwild: bool,
    #[arg(long = "walk-seed", default_value_t = 0)]
    pub walk_seed: u64,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct EmbedArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub walks: WalkArgs,
    /// Also write every walk, one per line
    #[arg(long)]
    pub export_walks: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
pub enum Treatment {
    /// Random 20% of relationships as test set
    #[value(name = "I")]
    I,
    /// One held-out school course as test set
    #[value(name = "II")]
    II,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GlobalModel {
    Deep,
    Forest,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct TrainGlobalArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,
    /// Embedding table CSV; computed from the graph when absent
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub walks: WalkArgs,
    #[arg(long, value_enum)]
    pub treatment: Treatment,
    #[arg(long, value_enum, default_value = "deep")]
    pub model: GlobalModel,
    #[arg(long, default_value = "hadamard")]
    pub merge: String,
    #[arg(long, value_enum, default_value = "strict")]
    pub scheme: Scheme,
    /// Runs for treatment I (0 = 390); for treatment II, the number of
    /// held-out courses (0 = all)
    #[arg(long, default_value_t = 0)]
    pub runs: usize,
    /// Treatment II: networks trained per held-out course, differing only in
    /// initialization
    #[arg(long, default_value_t = 10)]
    pub per_course: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 5)]
    pub smote_k: usize,
    #[arg(long, default_value_t = 20)]
    pub bins: usize,
    #[arg(long, default_value_t = 50)]
    pub deep_epochs: usize,
    #[arg(long, default_value_t = 100)]
    pub trees: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Nucleation followed by influence-driven growth
    Calibrated,
    /// Nucleation only, anchored trait probabilities
    Nucleation,
    /// Threshold-labeled fixture with ground truth sidecar
    Planted,
    /// Course-specific block patterns
    Blocks,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value = "calibrated")]
    pub preset: Preset,
    #[arg(long, default_value_t = 13)]
    pub schools: usize,
    #[arg(long, default_value_t = 3)]
    pub courses: usize,
    #[arg(long, default_value_t = 87)]
    pub students: usize,
    #[arg(long, default_value_t = 18.0)]
    pub degree: f64,
    /// Sign flip probability
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0.0)]
    pub resign_rate: f64,
    /// Planted fixture size
    #[arg(long, default_value_t = 300)]
    pub planted_n: usize,
    #[arg(long, default_value_t = 5.0)]
    pub theta: f64,
    #[arg(long, default_value_t = 0.05)]
    pub eta: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}
