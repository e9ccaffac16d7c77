//! The stochastic error `M`, matrix Bernstein bounds and their completion-specific forms.

mod tail;

pub use tail::{tail_verify, CoverageReport, TailBound, TailScenario};

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::designs::{Design, NoiseModel, ObservationSet};
use crate::error::{Error, Result};
use crate::linalg::{operator_norm, DenseMatrix};
use crate::rng::rng_from_seed;
use crate::scalar::Real;

/// `M = (1/n) Σ (Y_i X_i − E(Y_i X_i))` with `E(Y_i X_i) = Q(A0)` from the known design.
pub fn compute_m<T: Real>(obs: &ObservationSet<T>, a0: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
    let mean = obs.design.gram_apply(a0)?;
    obs.mean_response_design().sub(&mean)
}

/// Inputs shared by the two matrix Bernstein bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BernsteinInputs<T> {
    pub sigma_z: T,
    /// Almost-sure bound on `‖Z‖`, or its `ψ_α` norm.
    pub u: T,
    /// `None` is the bounded case `α = ∞`.
    pub alpha: Option<T>,
    pub t: T,
    pub m1: usize,
    pub m2: usize,
    pub n: usize,
}

impl<T: Real> BernsteinInputs<T> {
    fn validate(&self) -> Result<()> {
        for (v, what) in [(self.sigma_z, "sigma_Z"), (self.u, "U")] {
            if !(v >= T::zero()) || !v.is_finite() {
                return Err(Error::invalid(format!("{what} must be nonnegative, got {v}")));
            }
        }
        if !(self.t > T::zero()) || !self.t.is_finite() {
            return Err(Error::invalid("t must be positive"));
        }
        if self.m1 == 0 || self.m2 == 0 || self.n == 0 {
            return Err(Error::invalid("m1, m2 and n must be positive"));
        }
        Ok(())
    }

    /// `t + log(m1 + m2)`.
    fn t_log_m(&self) -> T {
        self.t + T::from_usize_lossy(self.m1 + self.m2).ln()
    }
}

/// `2 max{σ_Z √((t+log m)/n), U (t+log m)/n}`.
pub fn bernstein_bound_bounded<T: Real>(inp: &BernsteinInputs<T>) -> Result<T> {
    inp.validate()?;
    if inp.alpha.is_some() {
        return Err(Error::invalid("the bounded form needs alpha = infinity"));
    }
    let tl = inp.t_log_m();
    let n = T::from_usize_lossy(inp.n);
    Ok(T::lit(2.0) * (inp.sigma_z * (tl / n).sqrt()).max(inp.u * tl / n))
}

/// `C max{σ_Z √((t+log m)/n), U (log(U/σ_Z))^{1/α} (t+log m)/n}`, the log clamped below at 1.
pub fn bernstein_bound_psi_alpha<T: Real>(inp: &BernsteinInputs<T>, c: T) -> Result<T> {
    inp.validate()?;
    let alpha = inp
        .alpha
        .ok_or_else(|| Error::invalid("the psi_alpha form needs a finite alpha"))?;
    if !(alpha >= T::one()) || !alpha.is_finite() {
        return Err(Error::invalid("alpha must be at least 1"));
    }
    if !(inp.sigma_z > T::zero()) {
        return Err(Error::invalid("sigma_Z must be positive"));
    }
    if !(c > T::zero()) {
        return Err(Error::invalid("C must be positive"));
    }
    let tl = inp.t_log_m();
    let n = T::from_usize_lossy(inp.n);
    let log_term = (inp.u / inp.sigma_z).ln().max(T::one());
    Ok(c * (inp.sigma_z * (tl / n).sqrt()).max(inp.u * log_term.powf(alpha.recip()) * tl / n))
}

/// Default absolute constant for the `ψ_α` forms.
pub const DEFAULT_PSI_CONSTANT: f64 = 4.0;

/// Response model for [`completion_m_bound`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CompletionNoise<T> {
    /// `|Y| ≤ η` almost surely.
    Learning { eta: T },
    /// Sub-exponential noise with scale `σ` and exponent `α`, entries of `A0` bounded by `a`;
    /// `c` is the unspecified constant of the noise term.
    GaussianSubexp { sigma: T, a: T, alpha: T, c: T },
}

fn completion_branches<T: Real>(m1: usize, m2: usize, n: usize, t: T) -> (T, T, T) {
    let tl = t + T::from_usize_lossy(m1 + m2).ln();
    let small = T::from_usize_lossy(m1.min(m2));
    let nn = T::from_usize_lossy(n);
    ((tl / (small * nn)).sqrt(), tl / nn, small)
}

/// Closed-form high-probability bound on `‖M‖_∞` for uniform completion.
///
/// `Learning`: `2η max{√((t+log m)/((m1∧m2)n)), 2(t+log m)/n}`, probability `1 − e^{−t}`.
/// `GaussianSubexp`: noise part `C σ max{√(…), (t+log m) log^{1/α}(m1∧m2)/n}` plus
/// signal part `2a max{√(…), 2(t+log m)/n}`, probability `1 − 3e^{−t}`.
pub fn completion_m_bound<T: Real>(kind: &CompletionNoise<T>, m1: usize, m2: usize, n: usize, t: T) -> Result<T> {
    if m1 == 0 || m2 == 0 || n == 0 || !(t > T::zero()) {
        return Err(Error::invalid("m1, m2, n and t must be positive"));
    }
    let (root, lin, small) = completion_branches(m1, m2, n, t);
    let two = T::lit(2.0);
    match *kind {
        CompletionNoise::Learning { eta } => {
            if !(eta > T::zero()) {
                return Err(Error::invalid("eta must be positive"));
            }
            Ok(two * eta * root.max(two * lin))
        }
        CompletionNoise::GaussianSubexp { sigma, a, alpha, c } => {
            if !(sigma > T::zero()) || !(a >= T::zero()) || !(alpha >= T::one()) || !(c > T::zero()) {
                return Err(Error::invalid("need sigma > 0, a >= 0, alpha >= 1, C > 0"));
            }
            let noise = c * sigma * root.max(lin * small.ln().powf(alpha.recip()));
            let signal = two * a * root.max(two * lin);
            Ok(noise + signal)
        }
    }
}

/// Confidence level attached to [`completion_m_bound`]: the failure probability is `factor·e^{−t}`.
pub fn completion_failure_factor<T>(kind: &CompletionNoise<T>) -> f64 {
    match kind {
        CompletionNoise::Learning { .. } => 1.0,
        CompletionNoise::GaussianSubexp { .. } => 3.0,
    }
}

/// `max` of the largest row and column Euclidean norms.
pub fn a0_star_norm<T: Real>(a0: &DenseMatrix<T>) -> T {
    let (m1, m2) = a0.shape();
    let row = (0..m1)
        .map(|i| a0.row(i).iter().map(|&x| x * x).sum::<T>())
        .fold(T::zero(), T::max);
    let col = (0..m2)
        .map(|j| (0..m1).map(|i| a0[(i, j)] * a0[(i, j)]).sum::<T>())
        .fold(T::zero(), T::max);
    row.max(col).sqrt()
}

/// Exact `(E XXᵀ, E XᵀX)` for `X` uniform on the completion basis, by summation.
pub fn usr_second_moments<T: Real>(m1: usize, m2: usize) -> (DenseMatrix<T>, DenseMatrix<T>) {
    let p = T::from_usize_lossy(m1 * m2).recip();
    let mut left = DenseMatrix::zeros(m1, m1);
    let mut right = DenseMatrix::zeros(m2, m2);
    for i in 0..m1 {
        for j in 0..m2 {
            // e_i e_jᵀ (e_i e_jᵀ)ᵀ = e_i e_iᵀ and its transpose product is e_j e_jᵀ.
            left[(i, i)] += p;
            right[(j, j)] += p;
        }
    }
    (left, right)
}

/// `σ_X = max{‖E XXᵀ‖, ‖E XᵀX‖}^{1/2}` for the completion basis.
pub fn usr_sigma_x<T: Real>(m1: usize, m2: usize) -> Result<T> {
    let (l, r) = usr_second_moments::<T>(m1, m2);
    Ok(operator_norm(&l)?.max(operator_norm(&r)?).sqrt())
}

/// Exact `σ_Z` for `Z = YX − E(YX)` under uniform completion, where
/// `second_moment(i,j) = E(Y² | X = e_i e_jᵀ)`.
pub fn usr_sigma_z<T: Real>(second_moment: &DenseMatrix<T>, a0: &DenseMatrix<T>) -> Result<T> {
    second_moment.check_same_shape(a0)?;
    let (m1, m2) = a0.shape();
    let mm = T::from_usize_lossy(m1 * m2);
    let mean = a0.scaled(mm.recip());
    let mut left = mean.matmul(&mean.transpose())?.scaled(-T::one());
    let mut right = mean.transpose().matmul(&mean)?.scaled(-T::one());
    for i in 0..m1 {
        for j in 0..m2 {
            let s = second_moment[(i, j)] / mm;
            left[(i, i)] += s;
            right[(j, j)] += s;
        }
    }
    Ok(operator_norm(&left)?.max(operator_norm(&right)?).sqrt())
}

/// `inf{u > 0 : mean exp((|z|/u)^α) ≤ 2}` over the sample, by bisection.
pub fn psi_alpha_norm(samples: &[f64], alpha: f64) -> Result<f64> {
    if samples.is_empty() || !(alpha >= 1.0) {
        return Err(Error::invalid("need samples and alpha >= 1"));
    }
    let peak = samples.iter().fold(0.0f64, |m, z| m.max(z.abs()));
    if peak == 0.0 {
        return Ok(0.0);
    }
    let mean_exp = |u: f64| samples.iter().map(|z| (z.abs() / u).powf(alpha).exp()).sum::<f64>() / samples.len() as f64;
    let mut hi = peak / 2f64.ln().powf(1.0 / alpha);
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean_exp(mid) <= 2.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-13 * hi {
            break;
        }
    }
    Ok(hi)
}

/// `ψ_α` norm of a noise law from `samples` Monte-Carlo draws, memoised per argument tuple.
pub fn noise_psi_alpha(noise: &NoiseModel<f64>, alpha: f64, samples: usize, seed: u64) -> Result<f64> {
    static CACHE: OnceLock<Mutex<HashMap<String, f64>>> = OnceLock::new();
    let key = format!("{noise:?}|{alpha}|{samples}|{seed}");
    let cache = CACHE.get_or_init(Default::default);
    if let Some(&v) = cache.lock().expect("cache poisoned").get(&key) {
        return Ok(v);
    }
    noise.validate()?;
    let a0 = DenseMatrix::zeros(1, 1);
    let design = Design::<f64>::usr(1, 1);
    let mut rng = rng_from_seed(seed);
    let obs = crate::designs::sample_observations_with(&a0, &design, noise, samples.max(1), &mut rng)?;
    let v = psi_alpha_norm(&obs.responses(), alpha)?;
    cache.lock().expect("cache poisoned").insert(key, v);
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::designs::{generate_ground_truth, sample_observations, Entry, Samples};

    fn inputs(sigma_z: f64, u: f64, t: f64) -> BernsteinInputs<f64> {
        BernsteinInputs {
            sigma_z,
            u,
            alpha: None,
            t,
            m1: 50,
            m2: 50,
            n: 10_000,
        }
    }

    #[test]
    fn m_vanishes_on_balanced_noiseless_pass() {
        let a0 = generate_ground_truth::<f64>(3, 4, 2, 1.0, 1).unwrap();
        let mut es = Vec::new();
        for _ in 0..2 {
            for i in 0..3 {
                for j in 0..4 {
                    es.push(Entry {
                        row: i,
                        col: j,
                        y: a0[(i, j)],
                    });
                }
            }
        }
        let obs = ObservationSet::new(Design::usr(3, 4), Samples::Entries(es)).unwrap();
        assert!(compute_m(&obs, &a0).unwrap().max_abs() < 1e-16);
    }

    #[test]
    fn m_with_zero_truth_is_noise_average() {
        let a0 = DenseMatrix::<f64>::zeros(3, 3);
        let obs = sample_observations(&a0, &Design::usr(3, 3), &NoiseModel::Gaussian { sigma: 1.0 }, 20, 4).unwrap();
        assert_eq!(compute_m(&obs, &a0).unwrap(), obs.mean_response_design());
    }

    #[test]
    fn bounded_bernstein_examples() {
        assert_eq!(bernstein_bound_bounded(&inputs(0.0, 0.0, 2.0)).unwrap(), 0.0);
        let tl = 2.0 + 100f64.ln();
        let expected = 2.0 * (0.1 * (tl / 1e4).sqrt()).max(tl / 1e4);
        assert!((bernstein_bound_bounded(&inputs(0.1, 1.0, 2.0)).unwrap() - expected).abs() < 1e-16);
        let mut big = inputs(0.1, 1.0, 2.0);
        big.n = 1_000_000_000;
        let b = bernstein_bound_bounded(&big).unwrap();
        assert!((b - 0.2 * (tl / 1e9).sqrt()).abs() < 1e-15);
        assert!(bernstein_bound_bounded(&inputs(-1.0, 1.0, 2.0)).is_err());
    }

    #[test]
    fn psi_bernstein_examples() {
        let mut inp = inputs(0.2, 0.2 * std::f64::consts::E, 1.0);
        inp.m1 = 40;
        inp.m2 = 60;
        inp.n = 1000;
        inp.alpha = Some(1.0);
        let b1 = bernstein_bound_psi_alpha(&inp, 4.0).unwrap();
        inp.alpha = Some(2.0);
        let b2 = bernstein_bound_psi_alpha(&inp, 4.0).unwrap();
        assert!((b1 - b2).abs() < 1e-15);
        let tl = 1.0 + 100f64.ln();
        let expected = 4.0 * (0.2 * (tl / 1e3).sqrt()).max(0.2 * std::f64::consts::E * tl / 1e3);
        assert!((b2 - expected).abs() < 1e-14);
        inp.t = 3.0;
        assert!(bernstein_bound_psi_alpha(&inp, 4.0).unwrap() > b2);
        inp.sigma_z = 0.0;
        assert!(bernstein_bound_psi_alpha(&inp, 4.0).is_err());
    }

    #[test]
    fn learning_bound_examples() {
        let b = completion_m_bound(&CompletionNoise::Learning { eta: 1.0 }, 10, 10, 1000, 2.0).unwrap();
        let tl = 2.0 + 20f64.ln();
        let expected = 2.0 * (tl / 1e4).sqrt().max(2.0 * tl / 1e3);
        assert!((b - expected).abs() < 1e-16);
        let b2 = completion_m_bound(&CompletionNoise::Learning { eta: 2.0 }, 10, 10, 1000, 2.0).unwrap();
        assert!((b2 - 2.0 * b).abs() < 1e-16);
    }

    #[test]
    fn sigma_x_identity() {
        let (l, r) = usr_second_moments::<f64>(4, 6);
        assert!(l.sub(&DenseMatrix::identity(4).scaled(1.0 / 4.0)).unwrap().max_abs() < 1e-15);
        assert!(r.sub(&DenseMatrix::identity(6).scaled(1.0 / 6.0)).unwrap().max_abs() < 1e-15);
        assert!((usr_sigma_x::<f64>(4, 6).unwrap() - 0.5).abs() < 1e-15);
        let s = usr_sigma_z::<f64>(&DenseMatrix::from_fn(4, 6, |_, _| 9.0), &DenseMatrix::zeros(4, 6)).unwrap();
        assert!((s - 1.5).abs() < 1e-14);
    }

    #[test]
    fn a0_star_examples() {
        let ones = DenseMatrix::<f64>::from_fn(2, 3, |_, _| 1.0);
        assert!((a0_star_norm(&ones) - 3f64.sqrt()).abs() < 1e-15);
        assert_eq!(a0_star_norm(&DenseMatrix::<f64>::basis(3, 3, 0, 0)), 1.0);
    }

    #[test]
    fn psi_alpha_of_constant() {
        // |z| = c gives exp((c/u)^α) = 2, so u = c / (ln 2)^{1/α}.
        let u = psi_alpha_norm(&[3.0, -3.0], 2.0).unwrap();
        assert!((u - 3.0 / 2f64.ln().sqrt()).abs() < 1e-10);
        assert_eq!(psi_alpha_norm(&[0.0], 1.0).unwrap(), 0.0);
    }

    #[test]
    fn noise_psi_alpha_examples() {
        let u = noise_psi_alpha(&NoiseModel::BoundedSign { eta: 2.0 }, 1.0, 1000, 3).unwrap();
        assert!((u - 2.0 / 2f64.ln()).abs() < 1e-10);
        // E exp(g²/u²) = (1 − 2/u²)^{-1/2} = 2 at u² = 8/3; the estimator has heavy tails.
        let u = noise_psi_alpha(&NoiseModel::Gaussian { sigma: 1.0 }, 2.0, 200_000, 3).unwrap();
        assert!((u / (8.0f64 / 3.0).sqrt() - 1.0).abs() < 0.1, "{u}");
    }
}
