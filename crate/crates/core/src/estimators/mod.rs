//! The nuclear-norm penalized estimator, its λ rules and oracle-inequality evaluators.

mod optimality;
mod solver;

pub use optimality::{check_optimality, penalized_objective, OptimalityReport};
pub use solver::{solve_penalized, SolverConfig, SolverOutput};

use serde::{Deserialize, Serialize};

use crate::designs::{l2_pi_norm_sq, Design, ObservationSet};
use crate::error::{Error, Result};
use crate::linalg::{nuclear_norm, operator_norm, svd, DenseMatrix, Schatten};
use crate::scalar::Real;
use crate::stochastic::compute_m;

/// `((1+√2)/2)²`, the fast-rate constant.
pub fn fast_rate_constant<T: Real>() -> T {
    let c = (T::one() + T::lit(2.0).sqrt()) / T::lit(2.0);
    c * c
}

/// How the regularization parameter is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LambdaRule<T> {
    /// `2‖M‖_∞` from the known `A0`.
    Oracle,
    /// `C (σ∨a) max{√((t+log m)/((m1∧m2)n)), (t+log m) log^{1/α}(m1∧m2)/n}`.
    TheoryGaussian {
        t: T,
        scale: T,
        c: T,
        alpha: T,
    },
    /// `4η max{√((t+log m)/((m1∧m2)n)), 2(t+log m)/n}`.
    TheoryBounded {
        t: T,
        eta: T,
    },
    /// `C_* c_* √(log m/((m1∧m2)n))`.
    Rate {
        c_star: T,
        scale: T,
    },
    Fixed(T),
}

impl<T: Real> LambdaRule<T> {
    pub fn name(&self) -> &'static str {
        match self {
            LambdaRule::Oracle => "oracle",
            LambdaRule::TheoryGaussian { .. } => "theory-gaussian",
            LambdaRule::TheoryBounded { .. } => "theory-bounded",
            LambdaRule::Rate { .. } => "rate",
            LambdaRule::Fixed(_) => "fixed",
        }
    }

    /// Value of a data-free rule at the given dimensions; `None` for the oracle rule.
    pub fn formula(&self, m1: usize, m2: usize, n: usize) -> Result<Option<T>> {
        let pos = |x: T, what: &str| -> Result<()> {
            if x > T::zero() && x.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{what} must be positive, got {x}")))
            }
        };
        let small = T::from_usize_lossy(m1.min(m2));
        let nn = T::from_usize_lossy(n);
        let log_m = T::from_usize_lossy(m1 + m2).ln();
        let value = match *self {
            LambdaRule::Oracle => return Ok(None),
            LambdaRule::TheoryGaussian { t, scale, c, alpha } => {
                pos(t, "t")?;
                pos(scale, "sigma v a")?;
                pos(c, "C")?;
                if !(alpha >= T::one()) {
                    return Err(Error::invalid("alpha must be at least 1"));
                }
                let tl = t + log_m;
                let first = (tl / (small * nn)).sqrt();
                let second = tl * small.ln().powf(alpha.recip()) / nn;
                c * scale * first.max(second)
            }
            LambdaRule::TheoryBounded { t, eta } => {
                pos(t, "t")?;
                pos(eta, "eta")?;
                let tl = t + log_m;
                T::lit(4.0) * eta * (tl / (small * nn)).sqrt().max(T::lit(2.0) * tl / nn)
            }
            LambdaRule::Rate { c_star, scale } => {
                pos(c_star, "C*")?;
                pos(scale, "c*")?;
                c_star * scale * (log_m / (small * nn)).sqrt()
            }
            LambdaRule::Fixed(l) => {
                pos(l, "lambda")?;
                l
            }
        };
        Ok(Some(value))
    }
}

/// Evaluates a λ rule. The oracle rule needs `A0`.
pub fn select_lambda<T: Real>(rule: &LambdaRule<T>, obs: &ObservationSet<T>, a0: Option<&DenseMatrix<T>>) -> Result<T> {
    let (m1, m2) = obs.dims();
    match rule.formula(m1, m2, obs.n())? {
        Some(l) => Ok(l),
        None => {
            let a0 = a0.ok_or(Error::MissingOracle)?;
            Ok(T::lit(2.0) * operator_norm(&compute_m(obs, a0)?)?)
        }
    }
}

fn require_usr<T: Real>(obs: &ObservationSet<T>) -> Result<()> {
    if !obs.is_completion() {
        return Err(Error::InvalidDesign(format!(
            "{:?} design; the closed form needs uniform completion sampling",
            obs.design.kind()
        )));
    }
    Ok(())
}

/// `𝐗 = (m1 m2/n) Σ Y_i X_i` for completion data.
pub fn build_x_matrix<T: Real>(obs: &ObservationSet<T>) -> Result<DenseMatrix<T>> {
    require_usr(obs)?;
    let (m1, m2) = obs.dims();
    Ok(obs.mean_response_design().scaled(T::from_usize_lossy(m1 * m2)))
}

/// Closed-form completion estimate: `𝐗` soft-thresholded at `λ m1 m2/2`.
pub fn estimate_completion<T: Real>(obs: &ObservationSet<T>, lambda: T) -> Result<DenseMatrix<T>> {
    Ok(estimate_completion_with_rank(obs, lambda)?.0)
}

/// As [`estimate_completion`], also returning the number of singular values kept.
pub fn estimate_completion_with_rank<T: Real>(obs: &ObservationSet<T>, lambda: T) -> Result<(DenseMatrix<T>, usize)> {
    if !(lambda > T::zero()) || !lambda.is_finite() {
        return Err(Error::invalid(format!("lambda must be positive, got {lambda}")));
    }
    let x = build_x_matrix(obs)?;
    let (m1, m2) = obs.dims();
    let threshold = lambda * T::from_usize_lossy(m1 * m2) / T::lit(2.0);
    Ok(svd(&x)?.soft_threshold(threshold))
}

/// Which right-hand side of the oracle inequalities to evaluate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OracleVariant<T> {
    /// `2λ‖A0‖₁`.
    Slow,
    /// `((1+√2)/2)² μ² λ² rank(A0)`.
    Fast,
    /// `Σ_j min{τ², σ_j(A0)²/(m1 m2)}`; `q ∈ (0, 2]` selects the admissible family.
    Schatten { q: T, tau_sq: T },
}

/// `τ² = ((1+√2)/2)² C_*² c_*² max(m1,m2) log(m1+m2)/n`.
pub fn tau_squared<T: Real>(c_star: T, scale: T, m1: usize, m2: usize, n: usize) -> T {
    fast_rate_constant::<T>()
        * c_star
        * c_star
        * scale
        * scale
        * T::from_usize_lossy(m1.max(m2))
        * T::from_usize_lossy(m1 + m2).ln()
        / T::from_usize_lossy(n)
}

pub fn oracle_rhs<T: Real>(a0: &DenseMatrix<T>, lambda: T, mu: T, variant: OracleVariant<T>) -> Result<T> {
    if !(lambda > T::zero()) || !(mu > T::zero()) {
        return Err(Error::invalid("lambda and mu must be positive"));
    }
    let f = svd(a0)?;
    match variant {
        OracleVariant::Slow => Ok(T::lit(2.0) * lambda * f.sigma.iter().copied().sum::<T>()),
        OracleVariant::Fast => {
            Ok(fast_rate_constant::<T>() * mu * mu * lambda * lambda * T::from_usize_lossy(f.numerical_rank()))
        }
        OracleVariant::Schatten { q, tau_sq } => {
            if !(q > T::zero() && q <= T::lit(2.0)) {
                return Err(Error::invalid(format!("q must lie in (0, 2], got {q}")));
            }
            let mm = T::from_usize_lossy(a0.rows() * a0.cols());
            Ok(f.sigma[..f.numerical_rank()]
                .iter()
                .map(|&s| tau_sq.min(s * s / mm))
                .sum())
        }
    }
}

/// `τ^{2−q} ‖A0‖_q^q / (m1 m2)^{q/2}`, which dominates the Schatten variant.
pub fn schatten_q_bound<T: Real>(a0: &DenseMatrix<T>, q: T, tau_sq: T) -> Result<T> {
    if !(q > T::zero() && q <= T::lit(2.0)) {
        return Err(Error::invalid(format!("q must lie in (0, 2], got {q}")));
    }
    let sigma = svd(a0)?.sigma;
    let norm_q = crate::linalg::schatten_from_sigma(&sigma, Schatten::Finite(q));
    let mm = T::from_usize_lossy(a0.rows() * a0.cols());
    Ok(tau_sq.sqrt().powf(T::lit(2.0) - q) * norm_q.powf(q) / mm.powf(q / T::lit(2.0)))
}

/// Oracle bounds minimised over `{0, A0, best rank-k truncations of A0}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CandidateBounds<T> {
    /// `min_A ‖A−A0‖²_{L2(Π)} + 2λ‖A‖₁`.
    pub slow: T,
    /// `min_A ‖A−A0‖²_{L2(Π)} + ((1+√2)/2)² μ² λ² rank(A)`.
    pub fast: T,
}

pub fn candidate_bounds<T: Real>(
    a0: &DenseMatrix<T>,
    design: &Design<T>,
    lambda: T,
    mu: T,
) -> Result<CandidateBounds<T>> {
    let f = svd(a0)?;
    let r = f.numerical_rank();
    let fast_unit = fast_rate_constant::<T>() * mu * mu * lambda * lambda;
    let two = T::lit(2.0);
    let mut slow = l2_pi_norm_sq(a0, design)?;
    let mut fast = slow;
    for k in 1..=r {
        let a = if k == r { a0.clone() } else { f.truncate(k) };
        let err = l2_pi_norm_sq(&a.sub(a0)?, design)?;
        slow = slow.min(err + two * lambda * nuclear_norm(&a)?);
        fast = fast.min(err + fast_unit * T::from_usize_lossy(k));
    }
    Ok(CandidateBounds { slow, fast })
}
