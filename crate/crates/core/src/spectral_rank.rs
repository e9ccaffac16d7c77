//! Rank recovery by the inflated-λ completion estimator.

use serde::Serialize;

use crate::designs::ObservationSet;
use crate::error::{Error, Result};
use crate::estimators::{build_x_matrix, estimate_completion_with_rank};
use crate::linalg::{operator_norm, svd, DenseMatrix};
use crate::scalar::Real;
use crate::stochastic::compute_m;

/// Relative slack for comparisons that hold with equality in exact arithmetic.
const FLOAT_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RankRecoveryConfig<T> {
    pub delta: T,
    pub base_lambda: T,
}

impl<T: Real> RankRecoveryConfig<T> {
    pub fn new(delta: T, base_lambda: T) -> Result<Self> {
        if !(delta > T::zero() && delta < T::one()) {
            return Err(Error::invalid(format!("delta must lie in (0, 1), got {delta}")));
        }
        if !(base_lambda > T::zero()) || !base_lambda.is_finite() {
            return Err(Error::invalid("base lambda must be positive"));
        }
        Ok(RankRecoveryConfig { delta, base_lambda })
    }

    /// `λ′ = λ/(1−δ)`.
    pub fn lambda_prime(&self) -> T {
        self.base_lambda / (T::one() - self.delta)
    }
}

/// `Â^{λ′}` and its rank, read off the soft-threshold count.
pub fn recover_rank<T: Real>(obs: &ObservationSet<T>, cfg: &RankRecoveryConfig<T>) -> Result<(DenseMatrix<T>, usize)> {
    estimate_completion_with_rank(obs, cfg.lambda_prime())
}

/// Outcome of one rank-recovery trial against the known `A0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RankVerdict<T> {
    /// `λ ≥ 2‖M‖_∞`.
    pub hypothesis_held: bool,
    /// `r̂ ≤ rank(A0)`.
    pub upper_ok: bool,
    /// `min_{σ_j(A0) ≠ 0} σ_j(A0) ≥ λ′ m1 m2`.
    pub signal_condition_met: bool,
    /// `r̂ ≥ rank(A0)`.
    pub lower_rank_ok: bool,
    /// `‖Â^{λ′} − A0‖₂² ≥ δ²/(4(1−δ)²) rank(A0) (λ m1 m2)²`.
    pub frob_lower_ok: bool,
    /// `|σ_j(𝐗) − σ_j(A0)| ≤ m1 m2 ‖M‖_∞` for all `j`.
    pub weyl_ok: bool,
    pub r_hat: usize,
    pub rank_true: usize,
    pub m_norm: T,
    pub frob_err_sq: T,
    pub frob_lower_bound: T,
}

impl<T> RankVerdict<T> {
    /// The guarantees that must hold given which hypotheses held.
    pub fn consistent(&self) -> bool {
        if !self.hypothesis_held {
            return true;
        }
        self.upper_ok && self.weyl_ok && (!self.signal_condition_met || (self.lower_rank_ok && self.frob_lower_ok))
    }
}

pub fn check_rank_theorem<T: Real>(
    a0: &DenseMatrix<T>,
    obs: &ObservationSet<T>,
    cfg: &RankRecoveryConfig<T>,
) -> Result<RankVerdict<T>> {
    let (m1, m2) = obs.dims();
    let mm = T::from_usize_lossy(m1 * m2);
    let slack = T::lit(FLOAT_SLACK);
    let m_norm = operator_norm(&compute_m(obs, a0)?)?;
    let hypothesis_held = cfg.base_lambda >= T::lit(2.0) * m_norm;

    let fa = svd(a0)?;
    let rank_true = fa.numerical_rank();
    let (a_hat, r_hat) = recover_rank(obs, cfg)?;
    let lp = cfg.lambda_prime();

    let sigma_min = if rank_true == 0 {
        T::infinity()
    } else {
        fa.sigma[rank_true - 1]
    };
    let signal_condition_met = sigma_min >= lp * mm;

    let sx = svd(&build_x_matrix(obs)?)?.sigma;
    let weyl_gap = sx
        .iter()
        .zip(&fa.sigma)
        .fold(T::zero(), |g, (&x, &a)| g.max((x - a).abs()));
    let weyl_ok = weyl_gap <= mm * m_norm * (T::one() + slack) + slack * fa.sigma[0];

    let frob_err_sq = a_hat.sub(a0)?.frobenius_sq();
    let d = cfg.delta;
    let lm = cfg.base_lambda * mm;
    let frob_lower_bound =
        d * d / (T::lit(4.0) * (T::one() - d) * (T::one() - d)) * T::from_usize_lossy(rank_true) * lm * lm;

    Ok(RankVerdict {
        hypothesis_held,
        upper_ok: r_hat <= rank_true,
        signal_condition_met,
        lower_rank_ok: r_hat >= rank_true,
        frob_lower_ok: frob_err_sq >= frob_lower_bound * (T::one() - slack),
        weyl_ok,
        r_hat,
        rank_true,
        m_norm,
        frob_err_sq,
        frob_lower_bound,
    })
}

/// `(λ′, signal threshold)` for the rate-form `λ`:
/// `λ′ = C_* c_*/(1−δ) √(log m/((m1∧m2)n))`, threshold `C_* c_*/(1−δ) √(m1 m2) √(log m (m1∨m2)/n)`.
pub fn rate_lambda_prime<T: Real>(scale: T, c_star: T, delta: T, m1: usize, m2: usize, n: usize) -> Result<(T, T)> {
    if !(delta > T::zero() && delta < T::one()) {
        return Err(Error::invalid(format!("delta must lie in (0, 1), got {delta}")));
    }
    if !(scale > T::zero()) || !(c_star > T::zero()) || m1 == 0 || m2 == 0 || n == 0 {
        return Err(Error::invalid("parameters must be positive"));
    }
    let k = c_star * scale / (T::one() - delta);
    let log_m = T::from_usize_lossy(m1 + m2).ln();
    let nn = T::from_usize_lossy(n);
    let lambda_prime = k * (log_m / (T::from_usize_lossy(m1.min(m2)) * nn)).sqrt();
    let threshold = k * T::from_usize_lossy(m1 * m2).sqrt() * (log_m * T::from_usize_lossy(m1.max(m2)) / nn).sqrt();
    Ok((lambda_prime, threshold))
}
