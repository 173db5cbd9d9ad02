//! Command-line driver: synthetic data generation, fitting, evaluation
//! and benchmarks. Each subcommand is also callable as a library function
//! so that tests can run whole pipelines in-process.

pub mod commands;
pub mod error;
pub mod io;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use coalhc_core::samplers::{Algorithm, WeightMode};
use coalhc_core::synthetic::Preset;
use coalhc_core::KernelKind;

pub use error::{CliError, CliResult};

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "COALHC_THREADS";

#[derive(Debug, Parser)]
#[command(name = "coalhc", version, about = "Bayesian hierarchical clustering under the coalescent")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw synthetic datasets with known trees.
    Generate(GenerateArgs),
    /// Fit trees (and optionally hyperparameters) to a dataset.
    Fit(FitArgs),
    /// Score a fit against a true tree and/or class labels.
    Eval(EvalArgs),
    /// Time the fitters over a grid of dataset sizes.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PresetArg {
    D1,
    D2,
    D3,
}

impl From<PresetArg> for Preset {
    fn from(p: PresetArg) -> Self {
        match p {
            PresetArg::D1 => Preset::D1,
            PresetArg::D2 => Preset::D2,
            PresetArg::D3 => Preset::D3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AlgorithmArg {
    Mpost1,
    Mpost2,
    Postpost,
    Greedy,
    Mgreedy,
    /// Average-link agglomerative clustering.
    Hc,
}

impl AlgorithmArg {
    pub fn sampler(self) -> Option<Algorithm> {
        match self {
            AlgorithmArg::Mpost1 => Some(Algorithm::Mpost1),
            AlgorithmArg::Mpost2 => Some(Algorithm::Mpost2),
            AlgorithmArg::Postpost => Some(Algorithm::Postpost),
            AlgorithmArg::Greedy => Some(Algorithm::Greedy),
            AlgorithmArg::Mgreedy => Some(Algorithm::Mgreedy),
            AlgorithmArg::Hc => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AlgorithmArg::Mpost1 => "mpost1",
            AlgorithmArg::Mpost2 => "mpost2",
            AlgorithmArg::Postpost => "postpost",
            AlgorithmArg::Greedy => "greedy",
            AlgorithmArg::Mgreedy => "mgreedy",
            AlgorithmArg::Hc => "hc",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KernelArg {
    Se,
    Matern32,
    Diagonal,
}

impl From<KernelArg> for KernelKind {
    fn from(k: KernelArg) -> Self {
        match k {
            KernelArg::Se => KernelKind::SquaredExponential,
            KernelArg::Matern32 => KernelKind::Matern32Grid,
            KernelArg::Diagonal => KernelKind::Diagonal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WeightModeArg {
    Exact,
    Laplace,
}

impl From<WeightModeArg> for WeightMode {
    fn from(w: WeightModeArg) -> Self {
        match w {
            WeightModeArg::Exact => WeightMode::Exact,
            WeightModeArg::Laplace => WeightMode::Laplace,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    /// Named size preset: d1 = 32x32, d2 = 64x64, d3 = 128x128.
    #[arg(long, value_enum)]
    pub preset: Option<PresetArg>,
    /// Observations per dataset (overrides the preset).
    #[arg(long)]
    pub n: Option<usize>,
    /// Dimensions per observation (overrides the preset).
    #[arg(long)]
    pub d: Option<usize>,
    /// Number of replicates; 50 with a preset, 1 otherwise.
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long, value_enum, default_value = "se")]
    pub kernel: KernelArg,
    /// Length-scale parameter; defaults to d/4.
    #[arg(long)]
    pub ell: Option<f64>,
    #[arg(long, default_value_t = 1e-9)]
    pub sigma2: f64,
    /// Grid shape `HxW` for the Matérn kernel.
    #[arg(long)]
    pub grid: Option<String>,
    /// Draw a labelled Gaussian mixture with this many classes instead of
    /// diffusing along a coalescent tree.
    #[arg(long)]
    pub classes: Option<usize>,
    /// Spread of mixture centres relative to the within-class scale.
    #[arg(long, default_value_t = 3.0)]
    pub spread: f64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// `data.csv`, or a directory containing it.
    #[arg(long)]
    pub data: PathBuf,
    /// Class labels to copy next to the fit for later evaluation.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Per-dimension coordinates (`coords.json`).
    #[arg(long)]
    pub coords: Option<PathBuf>,
    /// Hyperparameters to use (e.g. a generated `theta.json`).
    #[arg(long)]
    pub theta: Option<PathBuf>,
    /// JSON settings file; command-line flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub algorithm: Option<AlgorithmArg>,
    #[arg(long)]
    pub particles: Option<usize>,
    /// Alternate tree and hyperparameter updates for this many iterations.
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long, value_enum)]
    pub kernel: Option<KernelArg>,
    /// Pin the noise variance at this value.
    #[arg(long)]
    pub fix_sigma2: Option<f64>,
    /// Slice window multiplier for merge-time draws.
    #[arg(long)]
    pub delta0: Option<f64>,
    #[arg(long, value_enum)]
    pub weight_mode: Option<WeightModeArg>,
    /// Reweight the fast sampler by the exact weight of each chosen pair.
    #[arg(long)]
    pub exact_correction: bool,
    /// Weigh pairs by the mass of positive waiting times only.
    #[arg(long)]
    pub truncated: bool,
    #[arg(long)]
    pub resample_threshold: Option<f64>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Fit directory containing `result.json`.
    #[arg(long, required_unless_present = "aggregate")]
    pub fit: Option<PathBuf>,
    /// Directory with `truth.json` (and possibly `labels.csv`).
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Summarize every `metrics.json` below this directory instead.
    #[arg(long, conflicts_with_all = ["fit", "truth", "labels"])]
    pub aggregate: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "16,32,64,128")]
    pub sizes: Vec<usize>,
    /// Dimension of every benchmark dataset.
    #[arg(long, default_value_t = 32)]
    pub dim: usize,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "mpost1,mpost2,postpost,greedy,mgreedy")]
    pub algorithms: Vec<AlgorithmArg>,
    #[arg(long, default_value_t = 100)]
    pub particles: usize,
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,
    /// Largest size at which the cubic reference sampler still runs.
    #[arg(long, default_value_t = 128)]
    pub postpost_cap: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Runs one parsed command.
pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Generate(a) => commands::generate::run(&a),
        Command::Fit(a) => commands::fit::run(&a),
        Command::Eval(a) => commands::eval::run(&a),
        Command::Bench(a) => commands::bench::run(&a),
    }
}

/// Thread cap from [`THREADS_ENV`], if set to a positive integer.
pub fn thread_cap() -> CliResult<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::config(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        },
    }
}
