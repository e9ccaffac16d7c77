use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::designs::ObservationSet;
use crate::error::Result;
use crate::linalg::{nuclear_norm, operator_norm, svd, trace_inner, DenseMatrix};
use crate::rng::rng_from_seed;
use crate::scalar::Real;

const PERTURBATIONS: usize = 8;
const PERTURBATION_SEED: u64 = 0x5eed;

/// `L_n(A) = ‖A‖²_{L2(Π)} − ⟨(2/n) Σ Y_i X_i, A⟩ + λ‖A‖₁`.
pub fn penalized_objective<T: Real>(a: &DenseMatrix<T>, obs: &ObservationSet<T>, lambda: T) -> Result<T> {
    let q = obs.design.gram_apply(a)?;
    let b = obs.mean_response_design();
    Ok(trace_inner(a, &q)? - T::lit(2.0) * trace_inner(&b, a)? + lambda * nuclear_norm(a)?)
}

/// Residuals of the first-order condition `0 ∈ ∂L_n(Â)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OptimalityReport<T> {
    pub passed: bool,
    pub subgradient_ok: bool,
    pub perturbation_ok: bool,
    /// Rank of `Â` used for the support `(S1, S2)`.
    pub rank: usize,
    /// `‖U_rᵀ G − V_rᵀ‖₂` with `G = −∇(smooth part)/λ`.
    pub left_residual: T,
    /// `‖G V_r − U_r‖₂`.
    pub right_residual: T,
    /// `‖P_{S1⊥} G P_{S2⊥}‖_∞`, must not exceed 1.
    pub complement_norm: T,
    /// `min_Δ L_n(Â+Δ) − L_n(Â)` over the random probes.
    pub min_perturbation_gain: T,
}

/// Checks that `Â` minimises `L_n` at level `λ`.
///
/// `G = (2/λ)(B − Q(Â))` must lie in `∂‖Â‖₁`, i.e. equal `U_r V_rᵀ` on the
/// support and have operator norm at most one off it. A handful of random
/// probes `Â ± Δ` must also not lower the objective by more than `tol`.
pub fn check_optimality<T: Real>(
    a_hat: &DenseMatrix<T>,
    obs: &ObservationSet<T>,
    lambda: T,
    tol: T,
) -> Result<OptimalityReport<T>> {
    let (m1, m2) = obs.dims();
    let two = T::lit(2.0);
    let q = obs.design.gram_apply(a_hat)?;
    let g = obs.mean_response_design().sub(&q)?.scaled(two / lambda);

    let f = svd(a_hat)?;
    let r = f.numerical_rank();
    let mut u = DenseMatrix::zeros(m1, r.max(1));
    let mut v = DenseMatrix::zeros(m2, r.max(1));
    for k in 0..r {
        for i in 0..m1 {
            u[(i, k)] = f.u[(i, k)];
        }
        for j in 0..m2 {
            v[(j, k)] = f.v[(j, k)];
        }
    }
    let (left_residual, right_residual) = if r == 0 {
        (T::zero(), T::zero())
    } else {
        let ut_g = u.transpose().matmul(&g)?;
        let g_v = g.matmul(&v)?;
        (
            ut_g.sub(&v.transpose())?.frobenius_sq().sqrt(),
            g_v.sub(&u)?.frobenius_sq().sqrt(),
        )
    };
    let proj = |basis: &DenseMatrix<T>, dim: usize| -> Result<DenseMatrix<T>> {
        let mut p = DenseMatrix::identity(dim);
        if r > 0 {
            p = p.sub(&basis.matmul(&basis.transpose())?)?;
        }
        Ok(p)
    };
    let complement = proj(&u, m1)?.matmul(&g)?.matmul(&proj(&v, m2)?)?;
    let complement_norm = operator_norm(&complement)?;
    let subgradient_ok = left_residual <= tol && right_residual <= tol && complement_norm <= T::one() + tol;

    let base = penalized_objective(a_hat, obs, lambda)?;
    let mut rng = rng_from_seed(PERTURBATION_SEED);
    let radius = T::lit(1e-3) * (T::one() + a_hat.frobenius_sq().sqrt());
    let mut min_gain = T::infinity();
    for _ in 0..PERTURBATIONS {
        let dir = DenseMatrix::from_fn(m1, m2, |_, _| {
            T::lit(<StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
        });
        let dir = dir.scaled(radius / dir.frobenius_sq().sqrt());
        for sign in [T::one(), -T::one()] {
            let probe = a_hat.add_scaled(sign, &dir)?;
            min_gain = min_gain.min(penalized_objective(&probe, obs, lambda)? - base);
        }
    }
    let perturbation_ok = min_gain >= -tol * T::one().max(base.abs());

    Ok(OptimalityReport {
        passed: subgradient_ok && perturbation_ok,
        subgradient_ok,
        perturbation_ok,
        rank: r,
        left_residual,
        right_residual,
        complement_norm,
        min_perturbation_gain: min_gain,
    })
}
