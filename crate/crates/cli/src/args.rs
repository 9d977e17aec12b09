//! Command-line surface. Selection flags map one-to-one onto `SelectionConfig`.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use easyfs::eval::{DEFAULT_ALPHA, DEFAULT_FOLDS};
use easyfs::{SelectionConfig, Task};

#[derive(Debug, Parser)]
#[command(name = "easyfs", version, about = "Model-free feature selection")]
pub struct Cli {
    /// Worker threads; falls back to EASYFS_THREADS, then to all cores.
    #[arg(long, global = true, env = "EASYFS_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rank the features of a dataset.
    Select(SelectArgs),
    /// Cross-validate rankers at several feature counts.
    Eval(EvalArgs),
    /// Check the fast kernels against straight-line references.
    OracleCheck(OracleArgs),
    /// Sweep network size and keep ratio, recording time and downstream metric.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TaskArg {
    Regression,
    Classification,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Self {
        match t {
            TaskArg::Regression => Task::Regression,
            TaskArg::Classification => Task::Classification,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    /// `label idx:val ...` per line, 1-based indices.
    Sparse,
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    #[arg(long)]
    pub input: PathBuf,

    /// Target column, by header name or 0-based index (CSV only).
    #[arg(long)]
    pub target: Option<String>,

    #[arg(long, value_enum)]
    pub task: TaskArg,

    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,

    /// The CSV has no header row.
    #[arg(long)]
    pub no_header: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SelectionArgs {
    /// Network size; defaults to min(2d, d + 1000).
    #[arg(long)]
    pub p: Option<usize>,

    #[arg(long, default_value_t = easyfs::rnp::DEFAULT_ROUNDS)]
    pub rounds: usize,

    #[arg(long, default_value_t = easyfs::redundancy::DEFAULT_EPSILON)]
    pub epsilon: f64,

    #[arg(long, default_value_t = 1.0)]
    pub lambda1: f64,

    #[arg(long, default_value_t = 1.0)]
    pub lambda2: f64,

    /// Percentage of expanded features kept.
    #[arg(long, default_value_t = 30.0)]
    pub r: f64,

    /// Connection density of the enhancement nodes.
    #[arg(long, default_value_t = easyfs::rnp::DEFAULT_DENSITY)]
    pub density: f64,

    #[arg(long, default_value_t = easyfs::rnp::DEFAULT_SPECTRAL_TARGET)]
    pub spectral_target: f64,

    /// Use the unscaled random weights.
    #[arg(long)]
    pub raw_weights: bool,

    #[arg(long, default_value_t = 42)]
    pub seed: u64,

    /// Score the raw inputs without network expansion.
    #[arg(long)]
    pub no_rnp: bool,

    /// Drop the redundancy term.
    #[arg(long)]
    pub no_cr: bool,

    /// Skip min-max scaling of the inputs before expansion.
    #[arg(long)]
    pub no_normalize: bool,
}

impl SelectionArgs {
    pub fn config(&self) -> SelectionConfig {
        SelectionConfig {
            p: self.p,
            rounds: self.rounds,
            epsilon: self.epsilon,
            lambda1: self.lambda1,
            lambda2: self.lambda2,
            r_percent: self.r,
            density: self.density,
            spectral_target: self.spectral_target,
            raw_weights: self.raw_weights,
            seed: self.seed,
            use_rnp: !self.no_rnp,
            use_cr: !self.no_cr,
            normalize_inputs: !self.no_normalize,
        }
    }
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[command(flatten)]
    pub input: InputArgs,

    #[command(flatten)]
    pub selection: SelectionArgs,

    /// Ranking CSV; standard output when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,

    /// Manifest path; defaults to `<output>.manifest.json`.
    #[arg(long)]
    pub manifest: Option<PathBuf>,

    /// Print ranking and manifest as JSON on standard output.
    #[arg(long)]
    pub json: bool,

    /// Write the network weights and partition to this file.
    #[arg(long)]
    pub dump_network: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub input: InputArgs,

    #[command(flatten)]
    pub selection: SelectionArgs,

    /// Comma-separated rankers (easyfs, pearson, variance, fisher, mi) or `all`.
    #[arg(long, default_value = "easyfs")]
    pub methods: String,

    /// Comma-separated feature counts.
    #[arg(long, value_delimiter = ',', default_value = "10,20,50")]
    pub ns: Vec<usize>,

    #[arg(long, default_value_t = DEFAULT_FOLDS)]
    pub folds: usize,

    /// Seed of the fold assignment.
    #[arg(long, default_value_t = 42)]
    pub fold_seed: u64,

    /// Ridge penalty of the downstream learner.
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,

    /// Report CSV; the table always goes to standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,

    /// Print the reports as JSON instead of the table.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long, default_value_t = 50)]
    pub cases: usize,

    /// Largest feature count in the redundancy sweep.
    #[arg(long, default_value_t = 64)]
    pub max_p: usize,

    #[arg(long, default_value_t = 7)]
    pub seed: u64,

    #[arg(long, default_value_t = 1e-8)]
    pub tolerance: f64,

    /// Test hook: corrupt one compact score of the first case.
    #[arg(long, hide = true)]
    pub perturb: Option<usize>,

    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub input: InputArgs,

    #[command(flatten)]
    pub selection: SelectionArgs,

    /// Comma-separated network sizes; 0 runs without the network.
    #[arg(long, value_delimiter = ',', required = true)]
    pub p_list: Vec<usize>,

    /// Comma-separated keep percentages; defaults to `--r`.
    #[arg(long, value_delimiter = ',')]
    pub r_list: Vec<f64>,

    /// Feature count handed to the downstream learner.
    #[arg(long, default_value_t = 10)]
    pub ns: usize,

    #[arg(long, default_value_t = DEFAULT_FOLDS)]
    pub folds: usize,

    #[arg(long, default_value_t = 42)]
    pub fold_seed: u64,

    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,

    /// Timing CSV; standard output when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}
