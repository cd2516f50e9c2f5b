use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use diffrank::{Normalization, PropagationConfig, TierScheme};

use crate::error::CliError;
use crate::input::InputFormat;

#[derive(Debug, Parser)]
#[command(name = "diffrank", version, about = "Difficulty-aware ranking of models and questions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rank models and questions in a response matrix.
    Rank(RankArgs),
    /// Compare the ranking against accuracy, weighted accuracy, Simple Rank and IRT.
    Baselines(BaselinesArgs),
    /// Re-rank after removing random subsets of models.
    Robustness(RobustnessArgs),
    /// Re-rank after removing each dataset in turn.
    DatasetLoo(DatasetLooArgs),
    /// Write a synthetic response matrix as CSV.
    Simulate(SimulateArgs),
    /// Time propagation on Bernoulli matrices of several sizes.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// Response matrix (CSV, or JSON lines for .jsonl/.ndjson).
    pub input: PathBuf,
    /// Overrides format detection by extension.
    #[arg(long, value_enum)]
    pub input_format: Option<InputFormat>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    pub format: OutputFormat,
    /// Write to a file instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct PropagationArgs {
    #[arg(long, default_value_t = 0.85)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_iters: usize,
}

impl PropagationArgs {
    pub fn config(&self) -> Result<PropagationConfig, CliError> {
        Ok(PropagationConfig::new(self.alpha, self.tolerance, self.max_iters)?)
    }
}

fn parse_normalization(s: &str) -> Result<Normalization, String> {
    s.parse().map_err(|e: diffrank::scoring::ScoringError| e.to_string())
}

fn parse_tiers(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected two boundaries `a,b`")?;
    let a: f64 = a.trim().parse().map_err(|_| format!("bad boundary `{a}`"))?;
    let b: f64 = b.trim().parse().map_err(|_| format!("bad boundary `{b}`"))?;
    TierScheme::new(a, b).map_err(|e| e.to_string())?;
    Ok((a, b))
}

/// Everything that shapes a ranking run, shared by `rank` and `simulate --rank`.
#[derive(Debug, Clone, Args)]
pub struct RankOptions {
    #[command(flatten)]
    pub propagation: PropagationArgs,
    /// Score scale: max100, minmax100 or raw.
    #[arg(long = "normalize", default_value = "max100", value_parser = parse_normalization)]
    pub normalization: Normalization,
    /// Use the graded construction even for 0/1 input.
    #[arg(long)]
    pub continuous: bool,
    /// Easy/medium and medium/hard boundaries on the 0-100 scale.
    #[arg(long, default_value = "33,67", value_parser = parse_tiers)]
    pub tiers: (f64, f64),
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Include wall-clock timings in the report.
    #[arg(long)]
    pub timing: bool,
}

impl RankOptions {
    pub fn tier_scheme(&self) -> TierScheme {
        TierScheme::new(self.tiers.0, self.tiers.1).expect("validated by the parser")
    }
}

#[derive(Debug, Clone, Args)]
pub struct RankArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub options: RankOptions,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum IrtChoice {
    None,
    #[value(name = "1pl")]
    OnePl,
    #[value(name = "2pl")]
    TwoPl,
    Both,
}

fn parse_mapping(s: &str) -> Result<(String, String), String> {
    let (from, to) = s.split_once('=').ok_or("expected FROM=TO")?;
    Ok((from.to_string(), to.to_string()))
}

#[derive(Debug, Clone, Args)]
pub struct BaselinesArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub propagation: PropagationArgs,
    #[arg(long, value_enum, default_value_t = IrtChoice::None)]
    pub irt: IrtChoice,
    /// Renames a dataset before weighting, e.g. `hard=medium+hard`. Repeatable.
    #[arg(long = "dataset-map", value_parser = parse_mapping)]
    pub dataset_map: Vec<(String, String)>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct RobustnessArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub propagation: PropagationArgs,
    /// Numbers of models to remove, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub k: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Leave each model out once instead of sampling.
    #[arg(long)]
    pub exhaustive: bool,
    /// Include mean seconds and time reduction against the full pool.
    #[arg(long)]
    pub timing: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct DatasetLooArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub propagation: PropagationArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scenario {
    #[value(name = "case_study")]
    CaseStudy,
    Bernoulli,
    Rasch,
    Pools,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PoolChoice {
    #[value(name = "homogeneous_strong")]
    HomogeneousStrong,
    #[value(name = "homogeneous_weak")]
    HomogeneousWeak,
    Mixed,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub scenario: Scenario,
    /// Questions (default 1000 for bernoulli and pools, 200 for rasch).
    #[arg(long)]
    pub q: Option<usize>,
    /// Models (default 20 for bernoulli, 10 for rasch).
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long, default_value_t = 0.5)]
    pub density: f64,
    #[arg(long, value_enum, default_value_t = PoolChoice::Mixed)]
    pub pool: PoolChoice,
    /// Matrix CSV destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also rank the written matrix and print the report.
    #[arg(long)]
    pub rank: bool,
    #[command(flatten)]
    pub options: RankOptions,
    /// Format of the ranking report.
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    pub format: OutputFormat,
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (q, m) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("size `{s}` is not QxM"))?;
    let q = q.trim().parse().map_err(|_| format!("bad Q in `{s}`"))?;
    let m = m.trim().parse().map_err(|_| format!("bad M in `{s}`"))?;
    Ok((q, m))
}

pub const DEFAULT_BENCH_SIZES: &str = "500000x500,500000x250,250000x500,250000x250";

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    /// Comma separated QxM sizes.
    #[arg(long, value_delimiter = ',', default_value = DEFAULT_BENCH_SIZES, value_parser = parse_size)]
    pub sizes: Vec<(usize, usize)>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1e-12)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 0.5)]
    pub density: f64,
    /// Refuse sizes whose estimated footprint exceeds this many GiB.
    #[arg(long, default_value_t = 3.0)]
    pub memory_cap_gib: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}
