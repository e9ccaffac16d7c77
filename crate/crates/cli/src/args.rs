use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "tracereg",
    version,
    about = "Nuclear-norm penalized trace regression experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a ground truth and an observation file.
    Simulate(SimulateArgs),
    /// Fit the estimator to an observation file.
    Estimate(EstimateArgs),
    /// Monte-Carlo sweep over sample sizes with a log-log rate fit.
    RateSweep(ExperimentArgs),
    /// Rank recovery with the inflated λ.
    RankRecovery(ExperimentArgs),
    /// Tail coverage of the closed-form bound on the stochastic error.
    Bernstein(ExperimentArgs),
    /// Lasso fit, or the sharp oracle inequality check on a synthetic design.
    Lasso(LassoArgs),
    /// Packing family for the lower bound, with exhaustive verification.
    Packing(PackingArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum NoiseKind {
    Gaussian,
    Subexp,
    Bounded,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum RuleKind {
    Oracle,
    TheoryGaussian,
    TheoryBounded,
    Rate,
    Fixed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DesignChoice {
    Usr,
    ColumnMask,
    Gaussian,
    Rademacher,
}

/// Flags shared by every experiment.
#[derive(Clone, Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long, default_value_t = 20)]
    pub m1: usize,
    #[arg(long, default_value_t = 20)]
    pub m2: usize,
    #[arg(long, default_value_t = 2)]
    pub rank: usize,
    /// Entry bound of the ground truth (for `lasso`: the multiplier `a ≥ 1` in λ).
    #[arg(long, default_value_t = 1.0)]
    pub a: f64,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',')]
    pub n_grid: Option<Vec<usize>>,
    #[arg(long, default_value_t = 0.5)]
    pub sigma: f64,
    /// Tail exponent of sub-exponential noise.
    #[arg(long, default_value_t = 2.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    pub eta: f64,
    #[arg(long, value_enum, default_value_t = NoiseKind::Gaussian)]
    pub noise: NoiseKind,
    #[arg(long, value_enum, default_value_t = RuleKind::Oracle)]
    pub lambda_rule: RuleKind,
    /// Value for `--lambda-rule fixed`.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, default_value_t = 4.0)]
    pub cstar: f64,
    #[arg(long, default_value_t = 2.0)]
    pub t: f64,
    #[arg(long, default_value_t = 0.5)]
    pub delta: f64,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub exp: ExperimentArgs,
    #[arg(long, value_enum, default_value_t = DesignChoice::Usr)]
    pub design: DesignChoice,
    /// Ground-truth output; defaults to `<out>` with extension `a0.txt`.
    #[arg(long)]
    pub a0_out: Option<PathBuf>,
}

#[derive(Clone, Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub exp: ExperimentArgs,
    /// Observation file.
    #[arg(long)]
    pub input: PathBuf,
    /// Ground truth in matrix text format; needed by the oracle rule.
    #[arg(long)]
    pub a0: Option<PathBuf>,
    #[arg(long, default_value_t = 5000)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
}

#[derive(Clone, Debug, Args)]
pub struct LassoArgs {
    #[command(flatten)]
    pub exp: ExperimentArgs,
    /// Design and response CSV; without it a synthetic orthonormal design is checked.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, default_value_t = 16)]
    pub p: usize,
    /// Number of nonzero coefficients of β*.
    #[arg(long, default_value_t = 2)]
    pub sparsity: usize,
    /// Magnitude of the nonzero coefficients of β*.
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    /// Per-support sample budget of the restricted-eigenvalue search.
    #[arg(long, default_value_t = 1000)]
    pub kappa_budget: usize,
}

#[derive(Clone, Debug, Args)]
pub struct PackingArgs {
    #[command(flatten)]
    pub exp: ExperimentArgs,
    /// Fixed γ; solved from the KL condition when absent.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// α of the averaged-KL condition.
    #[arg(long, default_value_t = 1.0 / 16.0)]
    pub kl_alpha: f64,
    #[arg(long, default_value_t = 100_000)]
    pub max_attempts: usize,
}
