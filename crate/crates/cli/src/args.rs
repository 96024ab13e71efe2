use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "gauss-mlc", version, about = "Robust multiclass linear classification experiments")]
pub struct Cli {
    /// JSON configuration of the subcommand; flags override its fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; every random stream of the run derives from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: one per core).
    #[arg(long, global = true, env = "GAUSS_MLC_THREADS")]
    pub threads: Option<usize>,
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

/// Options shared by every subcommand.
#[derive(Debug, Clone)]
pub struct Global {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out_dir: PathBuf,
}

impl Cli {
    pub fn global(&self) -> Global {
        Global {
            config: self.config.clone(),
            seed: self.seed,
            out_dir: self.out_dir.clone(),
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a labeled dataset from a synthetic source.
    GenData(GenDataArgs),
    /// Train a classifier and evaluate it on a holdout.
    Train(TrainArgs),
    /// Evaluate a saved model.
    Eval(EvalArgs),
    /// Critical angles and boundary masses of an MLC.
    Geometry(GeometryArgs),
    /// Perceptron error on the hard instance as the sample size grows.
    Lowerbound(LowerboundArgs),
    /// Numerical checks of the structural inequalities.
    LemmaLab(LemmaLabArgs),
    /// Paired comparison of two training configurations.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct SourceArgs {
    /// `random-mlc`, `hard-instance`, or the path of a model JSON.
    #[arg(long)]
    pub truth: Option<String>,
    #[arg(long)]
    pub k: Option<u32>,
    #[arg(long)]
    pub d: Option<usize>,
    /// `none`, `uniform-flip`, `pair-confusion` or `boundary-flip`.
    #[arg(long)]
    pub noise: Option<String>,
    /// Noise rate.
    #[arg(long)]
    pub eta: Option<f64>,
    /// Confused pair, as `i,j`.
    #[arg(long)]
    pub pair: Option<String>,
    /// Margin band of `boundary-flip`.
    #[arg(long)]
    pub band: Option<f64>,
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Number of examples.
    #[arg(long)]
    pub n: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Algo {
    Perceptron,
    #[default]
    AggregateInit,
    AggregateLocal3,
    AggregateLocalk,
}

impl Algo {
    pub fn name(self) -> &'static str {
        match self {
            Algo::Perceptron => "perceptron",
            Algo::AggregateInit => "aggregate-init",
            Algo::AggregateLocal3 => "aggregate-local3",
            Algo::AggregateLocalk => "aggregate-localk",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum, Default)]
#[serde(rename_all = "kebab-case")]
pub enum GeometryChoice {
    /// `(T, Φ)` of the ground truth, estimated by Monte Carlo.
    #[default]
    Oracle,
    /// Search over a grid of guesses.
    Grid,
}

#[derive(Debug, Clone, Default, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long, value_enum)]
    pub algo: Option<Algo>,
    /// Train on a dataset file instead of the synthetic source.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Evaluate on a dataset file instead of a fresh synthetic holdout.
    #[arg(long)]
    pub eval_data: Option<PathBuf>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// The constant `C` of the step sizes.
    #[arg(long)]
    pub big_c: Option<f64>,
    /// `desk` or `theory`.
    #[arg(long)]
    pub preset: Option<String>,
    /// Examples per gradient step.
    #[arg(long)]
    pub n_step: Option<usize>,
    /// Iterations per run.
    #[arg(long)]
    pub iters: Option<usize>,
    /// Selection sample size.
    #[arg(long)]
    pub n_sel: Option<usize>,
    /// Geometry input of `aggregate-localk`.
    #[arg(long, value_enum)]
    pub geometry: Option<GeometryChoice>,
    /// Training examples of the perceptron.
    #[arg(long)]
    pub perceptron_n: Option<usize>,
    /// Holdout size.
    #[arg(long)]
    pub n_eval: Option<usize>,
    /// Monte-Carlo size of the oracle geometry.
    #[arg(long)]
    pub n_mc: Option<usize>,
    /// Record wall-clock times in the trace CSV (makes it irreproducible).
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Model JSON to evaluate.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Labeled dataset; without it a synthetic holdout is drawn.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[command(flatten)]
    pub source: SourceArgs,
    /// Synthetic holdout size.
    #[arg(long)]
    pub n: Option<usize>,
}

#[derive(Debug, Args)]
pub struct GeometryArgs {
    /// MLC model JSON; without it the rows are drawn uniformly on the sphere.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<u32>,
    #[arg(long)]
    pub d: Option<usize>,
    /// Number of random MLCs (regularity experiment); 0 analyses one MLC.
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub n_mc: Option<usize>,
}

#[derive(Debug, Args)]
pub struct LowerboundArgs {
    #[arg(long)]
    pub k: Option<u32>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub l: Option<u32>,
    #[arg(long)]
    pub eps: Option<f64>,
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',')]
    pub n_schedule: Option<Vec<usize>>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub n_eval: Option<usize>,
}

#[derive(Debug, Args)]
pub struct LemmaLabArgs {
    /// Comma-separated subset of `correlation,pgd,disagreement,blowup,localization`.
    #[arg(long, value_delimiter = ',')]
    pub checks: Option<Vec<String>>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub n_mc: Option<usize>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub big_c: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Train configuration of the first arm (default: `--config` and flags).
    #[arg(long)]
    pub config_a: Option<PathBuf>,
    #[arg(long)]
    pub config_b: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub algo_a: Option<Algo>,
    #[arg(long, value_enum)]
    pub algo_b: Option<Algo>,
    /// Number of paired seeds `seed, seed + 1, ...`.
    #[arg(long)]
    pub seeds: Option<u64>,
    #[command(flatten)]
    pub train: TrainArgs,
}
