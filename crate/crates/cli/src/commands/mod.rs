//! Subcommand implementations and the pieces they share.

mod bernstein;
mod estimate;
mod lasso;
mod packing;
mod rank;
mod simulate;
mod sweep;

pub use bernstein::cmd_bernstein;
pub use estimate::cmd_estimate;
pub use lasso::cmd_lasso;
pub use packing::cmd_packing;
pub use rank::cmd_rank_recovery;
pub use simulate::cmd_simulate;
pub use sweep::{cmd_rate_sweep, run_sweep, SweepOutcome};

use std::path::{Path, PathBuf};

use serde::Serialize;
use tracereg::designs::subexp_constants;
use tracereg::designs::{sample_observations_with, Design};
use tracereg::estimators::{candidate_bounds, estimate_completion_with_rank, select_lambda};
use tracereg::linalg::operator_norm;
use tracereg::rng::{derive_seed, trial_rng};
use tracereg::stochastic::{completion_m_bound, compute_m, CompletionNoise, DEFAULT_PSI_CONSTANT};
use tracereg::{LambdaRule, Matrix, NoiseModel};

use crate::args::{ExperimentArgs, NoiseKind, RuleKind};
use crate::error::{invalid, CliResult};
use crate::record::ExperimentRecord;

/// Relative allowance for inequalities that can hold with equality.
pub(crate) const CHECK_SLACK: f64 = 1e-9;

/// Index of the ground-truth stream under the master seed.
pub(crate) const TRUTH_STREAM: u64 = u64::MAX;

pub(crate) fn noise_model(exp: &ExperimentArgs) -> NoiseModel {
    match exp.noise {
        NoiseKind::Gaussian => NoiseModel::Gaussian { sigma: exp.sigma },
        NoiseKind::Subexp => NoiseModel::SubExp {
            sigma: exp.sigma,
            alpha: exp.alpha,
        },
        NoiseKind::Bounded => NoiseModel::BoundedSign { eta: exp.eta },
        NoiseKind::None => NoiseModel::None,
    }
}

/// `c_*`: `σ∨a` for additive noise, `η` for bounded responses, `a` without noise.
fn noise_scale(exp: &ExperimentArgs) -> f64 {
    match exp.noise {
        NoiseKind::Gaussian | NoiseKind::Subexp => exp.sigma.max(exp.a),
        NoiseKind::Bounded => exp.eta,
        NoiseKind::None => exp.a,
    }
}

pub(crate) fn lambda_rule(exp: &ExperimentArgs) -> CliResult<LambdaRule> {
    if exp.lambda.is_some() && exp.lambda_rule != RuleKind::Fixed {
        return Err(invalid("--lambda is only used with --lambda-rule fixed"));
    }
    Ok(match exp.lambda_rule {
        RuleKind::Oracle => LambdaRule::Oracle,
        RuleKind::TheoryGaussian => LambdaRule::TheoryGaussian {
            t: exp.t,
            scale: noise_scale(exp),
            c: exp.cstar,
            alpha: exp.alpha,
        },
        RuleKind::TheoryBounded => LambdaRule::TheoryBounded { t: exp.t, eta: exp.eta },
        RuleKind::Rate => LambdaRule::Rate {
            c_star: exp.cstar,
            scale: noise_scale(exp),
        },
        RuleKind::Fixed => LambdaRule::Fixed(
            exp.lambda
                .ok_or_else(|| invalid("--lambda-rule fixed needs --lambda"))?,
        ),
    })
}

/// Closed-form bound on `‖M‖_∞` matching the noise flags.
pub(crate) fn completion_noise(exp: &ExperimentArgs) -> CompletionNoise<f64> {
    match exp.noise {
        NoiseKind::Gaussian => CompletionNoise::GaussianSubexp {
            sigma: exp.sigma * subexp_constants(2.0).scale_factor,
            a: exp.a,
            alpha: 2.0,
            c: DEFAULT_PSI_CONSTANT,
        },
        NoiseKind::Subexp => CompletionNoise::GaussianSubexp {
            sigma: exp.sigma * subexp_constants(exp.alpha).scale_factor,
            a: exp.a,
            alpha: exp.alpha,
            c: DEFAULT_PSI_CONSTANT,
        },
        NoiseKind::Bounded => CompletionNoise::Learning { eta: exp.eta },
        NoiseKind::None => CompletionNoise::Learning { eta: exp.a },
    }
}

pub(crate) fn validate_common(exp: &ExperimentArgs) -> CliResult<()> {
    if exp.m1 == 0 || exp.m2 == 0 {
        return Err(invalid("--m1 and --m2 must be positive"));
    }
    if exp.rank == 0 || exp.rank > exp.m1.min(exp.m2) {
        return Err(invalid(format!("--rank must lie in 1..={}", exp.m1.min(exp.m2))));
    }
    if exp.trials == 0 {
        return Err(invalid("--trials must be positive"));
    }
    if exp.noise == NoiseKind::Bounded && exp.a > exp.eta {
        return Err(invalid("bounded responses need --a <= --eta"));
    }
    noise_model(exp).validate()?;
    Ok(())
}

pub(crate) fn require_out(exp: &ExperimentArgs) -> CliResult<&Path> {
    exp.out.as_deref().ok_or_else(|| invalid("--out is required"))
}

/// `path` with its extension replaced.
pub(crate) fn sibling(path: &Path, ext: &str) -> PathBuf {
    path.with_extension(ext)
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

pub(crate) fn print_json<T: Serialize>(value: &T) -> CliResult<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

/// One completion trial with its oracle-inequality checks.
#[derive(Clone, Debug)]
pub struct TrialOutcome {
    pub record: ExperimentRecord,
    /// `λ ≥ 2‖M‖_∞`.
    pub hypothesis_held: bool,
    pub slow_ok: bool,
    pub fast_ok: bool,
}

impl TrialOutcome {
    /// Bounds hold whenever their hypothesis does.
    pub fn consistent(&self) -> bool {
        !self.hypothesis_held || (self.slow_ok && self.fast_ok)
    }
}

pub(crate) fn completion_trial(
    a0: &Matrix,
    exp: &ExperimentArgs,
    rule: &LambdaRule,
    n: usize,
    trial: usize,
    stream: u64,
) -> CliResult<TrialOutcome> {
    let (m1, m2) = a0.shape();
    let design = Design::usr(m1, m2);
    let mut rng = trial_rng(exp.seed, stream);
    let obs = sample_observations_with(a0, &design, &noise_model(exp), n, &mut rng)?;
    let lambda = select_lambda(rule, &obs, Some(a0))?;
    let m_norm = operator_norm(&compute_m(&obs, a0)?)?;
    let (a_hat, rank_hat) = estimate_completion_with_rank(&obs, lambda)?;
    let mm = (m1 * m2) as f64;
    let err = a_hat.sub(a0)?.frobenius_sq() / mm;
    let bounds = candidate_bounds(a0, &design, lambda, mm.sqrt())?;
    let record = ExperimentRecord {
        trial,
        m1,
        m2,
        n,
        rank_true: exp.rank,
        lambda,
        lambda_rule: rule.name().to_string(),
        frob_err_sq_norm: err,
        rank_hat,
        oracle_rhs_fast: bounds.fast,
        oracle_rhs_slow: bounds.slow,
        m_norm,
        bound_m: completion_m_bound(&completion_noise(exp), m1, m2, n, exp.t)?,
        seed: derive_seed(exp.seed, stream),
    };
    let within = |b: f64| err <= b * (1.0 + CHECK_SLACK);
    Ok(TrialOutcome {
        hypothesis_held: lambda >= 2.0 * m_norm,
        slow_ok: within(bounds.slow),
        fast_ok: within(bounds.fast),
        record,
    })
}
