//! Vector Lasso: the fixed diagonal-design case of trace regression.

mod re;

pub use re::{kappa_re, project_l1_ball, KappaEstimate, MAX_P, MAX_S, MIN_BUDGET};

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::designs::{Design, ObservationSet, Samples};
use crate::error::{Error, Result};
use crate::estimators::{solve_penalized, SolverConfig};
use crate::linalg::{svd, DenseMatrix};
use crate::rng::{rng_from_seed, trial_rng};
use crate::scalar::Real;
use crate::stats::Wilson;

/// Slack on the unit bound for column norms.
const NORMALIZED_SLACK: f64 = 1e-12;

/// `n × p` design with rows `x_iᵀ`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearDesign<T> {
    x: DenseMatrix<T>,
    normalized: bool,
}

impl<T: Real> LinearDesign<T> {
    pub fn new(x: DenseMatrix<T>) -> Result<Self> {
        if x.rows() == 0 || x.cols() == 0 {
            return Err(Error::invalid("design must be non-empty"));
        }
        if !x.is_finite() {
            return Err(Error::NonFinite("design matrix"));
        }
        let mut d = LinearDesign { x, normalized: false };
        d.normalized = d.max_column_norm_sq() <= T::one() + T::lit(NORMALIZED_SLACK);
        Ok(d)
    }

    /// `√n U` with `U` the left singular vectors of an `n × p` Gaussian matrix, so `(1/n)𝕏ᵀ𝕏 = I`.
    pub fn orthonormal(n: usize, p: usize, seed: u64) -> Result<Self> {
        if p == 0 || n < p {
            return Err(Error::invalid(format!(
                "orthonormal design needs n >= p >= 1, got n = {n}, p = {p}"
            )));
        }
        let mut rng = rng_from_seed(seed);
        let g = DenseMatrix::from_fn(n, p, |_, _| T::lit(rng.sample::<f64, _>(StandardNormal)));
        let f = svd(&g)?;
        let root_n = T::from_usize_lossy(n).sqrt();
        Self::new(f.u.scaled(root_n))
    }

    pub fn x(&self) -> &DenseMatrix<T> {
        &self.x
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn p(&self) -> usize {
        self.x.cols()
    }

    /// `max_j (1/n) Σ_i x_i(j)² ≤ 1` up to `1e-12`.
    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn max_column_norm_sq(&self) -> T {
        self.column_norms_sq().into_iter().fold(T::zero(), T::max)
    }

    fn column_norms_sq(&self) -> Vec<T> {
        let n = T::from_usize_lossy(self.n());
        (0..self.p())
            .map(|j| (0..self.n()).map(|i| self.x[(i, j)] * self.x[(i, j)]).sum::<T>() / n)
            .collect()
    }

    /// `(1/n)𝕏ᵀ𝕏`.
    pub fn gram(&self) -> DenseMatrix<T> {
        let n = T::from_usize_lossy(self.n());
        let p = self.p();
        DenseMatrix::from_fn(p, p, |a, b| {
            (0..self.n()).map(|i| self.x[(i, a)] * self.x[(i, b)]).sum::<T>() / n
        })
    }

    pub fn predict(&self, beta: &[T]) -> Result<Vec<T>> {
        self.x.mul_vec(beta)
    }

    /// `(1/n)|𝕏(β − β')|²`.
    pub fn prediction_error(&self, beta: &[T], other: &[T]) -> Result<T> {
        if beta.len() != self.p() || other.len() != self.p() {
            return Err(Error::Dimension(format!(
                "coefficient vectors must have length {}",
                self.p()
            )));
        }
        let diff: Vec<T> = beta.iter().zip(other).map(|(&a, &b)| a - b).collect();
        let fit = self.predict(&diff)?;
        Ok(fit.iter().map(|&v| v * v).sum::<T>() / T::from_usize_lossy(self.n()))
    }

    /// `(2/n)𝕏ᵀ(𝕏β − y)`.
    pub fn loss_gradient(&self, beta: &[T], y: &[T]) -> Result<Vec<T>> {
        let fit = self.predict(beta)?;
        let scale = T::lit(2.0) / T::from_usize_lossy(self.n());
        Ok((0..self.p())
            .map(|j| scale * (0..self.n()).map(|i| (fit[i] - y[i]) * self.x[(i, j)]).sum::<T>())
            .collect())
    }

    /// Matrices `diag(x_i)` and responses as a fixed trace-regression problem.
    pub fn diagonal_embedding(&self, y: &[T]) -> Result<ObservationSet<T>> {
        self.check_response(y)?;
        let p = self.p();
        let mats: Vec<DenseMatrix<T>> = (0..self.n())
            .map(|i| DenseMatrix::from_diag(p, p, self.x.row(i)))
            .collect();
        let samples = Samples::Matrices(mats.iter().cloned().zip(y.iter().copied()).collect());
        ObservationSet::new(Design::fixed(mats)?, samples)
    }

    fn check_response(&self, y: &[T]) -> Result<()> {
        if y.len() != self.n() {
            return Err(Error::Dimension(format!(
                "response has length {}, design has {} rows",
                y.len(),
                self.n()
            )));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("response"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LassoOutput<T> {
    pub beta: Vec<T>,
    pub sweeps: usize,
    pub kkt_residual: T,
    pub converged: bool,
}

/// Largest violation of the optimality conditions of `(1/n)|y − 𝕏β|² + λ|β|₁`.
pub fn kkt_residual<T: Real>(design: &LinearDesign<T>, y: &[T], beta: &[T], lambda: T) -> Result<T> {
    let g = design.loss_gradient(beta, y)?;
    Ok(g.iter().zip(beta).fold(T::zero(), |r, (&gj, &bj)| {
        let v = if bj != T::zero() {
            (gj + lambda * bj.signum()).abs()
        } else {
            (gj.abs() - lambda).max(T::zero())
        };
        r.max(v)
    }))
}

/// Target KKT residual of [`lasso_solve`].
pub const KKT_TOL: f64 = 1e-9;

/// Cyclic coordinate descent for `argmin (1/n)Σ(y_i − x_iᵀβ)² + λ|β|₁`.
///
/// `cfg.max_iters` bounds the number of sweeps. Stops once the KKT residual is
/// at most [`KKT_TOL`].
pub fn lasso_solve<T: Real>(
    design: &LinearDesign<T>,
    y: &[T],
    lambda: T,
    cfg: &SolverConfig<T>,
) -> Result<LassoOutput<T>> {
    cfg.validate()?;
    design.check_response(y)?;
    if !(lambda > T::zero()) || !lambda.is_finite() {
        return Err(Error::invalid(format!("lambda must be positive, got {lambda}")));
    }
    let (n, p) = (design.n(), design.p());
    let nn = T::from_usize_lossy(n);
    let x = design.x();
    let col_sq = design.column_norms_sq();
    let half = lambda / T::lit(2.0);
    let tol = T::lit(KKT_TOL);

    let mut beta = vec![T::zero(); p];
    let mut resid = y.to_vec();
    let mut sweeps = 0;
    let mut residual = kkt_residual(design, y, &beta, lambda)?;
    while residual > tol && sweeps < cfg.max_iters {
        sweeps += 1;
        for j in 0..p {
            if col_sq[j] == T::zero() {
                continue;
            }
            let rho = (0..n).map(|i| x[(i, j)] * resid[i]).sum::<T>() / nn + col_sq[j] * beta[j];
            let next = rho.signum() * (rho.abs() - half).max(T::zero()) / col_sq[j];
            let delta = next - beta[j];
            if delta != T::zero() {
                for i in 0..n {
                    resid[i] -= delta * x[(i, j)];
                }
                beta[j] = next;
            }
        }
        if beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::Divergence { iteration: sweeps });
        }
        // Recomputing the residual from scratch keeps drift out of the KKT check.
        let fit = design.predict(&beta)?;
        resid = y.iter().zip(&fit).map(|(&a, &b)| a - b).collect();
        residual = kkt_residual(design, y, &beta, lambda)?;
    }
    Ok(LassoOutput {
        beta,
        sweeps,
        kkt_residual: residual,
        converged: residual <= tol,
    })
}

/// `y = 𝕏β + σξ` with standard normal `ξ` drawn from stream `index` of `seed`.
pub fn gaussian_response(
    design: &LinearDesign<f64>,
    beta: &[f64],
    sigma: f64,
    seed: u64,
    index: u64,
) -> Result<Vec<f64>> {
    let mut rng = trial_rng(seed, index);
    Ok(design
        .predict(beta)?
        .into_iter()
        .map(|v| v + sigma * rng.sample::<f64, _>(StandardNormal))
        .collect())
}

/// `max_j |β̂_j − Â_jj|` between [`lasso_solve`] and the trace-regression solver on `diag(x_i)`.
pub fn embedding_gap<T: Real>(design: &LinearDesign<T>, y: &[T], lambda: T) -> Result<T> {
    // Iterate tolerance √rel_tol = 1e-12; ill-conditioned designs need it for a 1e-6 comparison.
    let cfg = SolverConfig {
        max_iters: 200_000,
        rel_tol: T::lit(1e-24),
        step_size: None,
    };
    let lasso = lasso_solve(design, y, lambda, &cfg)?;
    let obs = design.diagonal_embedding(y)?;
    let trace = solve_penalized(&obs, lambda, &cfg)?;
    Ok(lasso
        .beta
        .iter()
        .enumerate()
        .map(|(j, &b)| (b - trace.estimate[(j, j)]).abs())
        .fold(T::zero(), T::max))
}

/// `λ = 3a√2 σ √(log p / n)`.
pub fn sharp_oracle_lambda<T: Real>(sigma: T, p: usize, n: usize, a: T) -> Result<T> {
    if p < 2 || n == 0 {
        return Err(Error::invalid("need p >= 2 and n >= 1"));
    }
    if !(a >= T::one()) || !a.is_finite() {
        return Err(Error::invalid(format!("a must be at least 1, got {a}")));
    }
    if !(sigma >= T::zero()) || !sigma.is_finite() {
        return Err(Error::invalid("sigma must be non-negative"));
    }
    let c = T::lit(3.0) * a * T::lit(2.0).sqrt();
    Ok(c * sigma * (T::from_usize_lossy(p).ln() / T::from_usize_lossy(n)).sqrt())
}

/// `1/(p^{a²−1} √(π log p))`, capped at 1.
pub fn failure_probability(p: usize, a: f64) -> Result<f64> {
    if p < 2 || !(a >= 1.0) || !a.is_finite() {
        return Err(Error::invalid("need p >= 2 and a >= 1"));
    }
    let lp = (p as f64).ln();
    Ok((1.0 / ((p as f64).powf(a * a - 1.0) * (std::f64::consts::PI * lp).sqrt())).min(1.0))
}

/// Noise event `|(1/n) Σ ξ_i x_i|_∞ ≤ aσ√(2 log p / n)` on which the inequality is deterministic.
pub fn noise_event_radius(sigma: f64, p: usize, n: usize, a: f64) -> f64 {
    a * sigma * (2.0 * (p as f64).ln() / n as f64).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SharpOracleConfig {
    pub sigma: f64,
    pub a: f64,
    pub trials: usize,
    pub seed: u64,
    /// Per-support sample budget for the `κ` search.
    pub kappa_budget: usize,
}

impl Default for SharpOracleConfig {
    fn default() -> Self {
        SharpOracleConfig {
            sigma: 1.0,
            a: 1.0,
            trials: 500,
            seed: 0,
            kappa_budget: MIN_BUDGET,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SharpOracleVerdict {
    pub trials: usize,
    pub p: usize,
    pub n: usize,
    pub lambda: f64,
    pub sparsity: usize,
    /// `κ(s, 5)` upper estimate; `None` when `β* = 0`.
    pub kappa: Option<f64>,
    /// `min` of the right-hand side over `β ∈ {β*, 0}`.
    pub bound: f64,
    pub violations: usize,
    pub violation_frac: f64,
    pub failure_probability: f64,
    /// Three Wilson standard errors at the observed count.
    pub wilson_slack: f64,
    pub noise_event_count: usize,
    /// Violations in trials where the noise event held; the inequality says this is zero.
    pub violations_on_event: usize,
    pub median_error: f64,
    pub passed: bool,
}

/// Monte-Carlo check of the sharp oracle inequality with Gaussian noise.
///
/// Each trial draws `y = 𝕏β* + σξ`, fits the Lasso at [`sharp_oracle_lambda`]
/// and compares `(1/n)|𝕏(β̂ − β*)|²` with
/// `min{ C²σ² M(β*) log p / (n κ²(M(β*), 5)), (1/n)|𝕏β*|² }`.
pub fn check_sharp_oracle(
    design: &LinearDesign<f64>,
    beta_star: &[f64],
    cfg: &SharpOracleConfig,
) -> Result<SharpOracleVerdict> {
    let (n, p) = (design.n(), design.p());
    if beta_star.len() != p {
        return Err(Error::Dimension(format!(
            "beta* has length {}, design has {p} columns",
            beta_star.len()
        )));
    }
    if !design.is_normalized() {
        return Err(Error::invalid("design columns must satisfy (1/n)|x_j|^2 <= 1"));
    }
    if cfg.trials == 0 {
        return Err(Error::invalid("trials must be positive"));
    }
    let lambda = sharp_oracle_lambda(cfg.sigma, p, n, cfg.a)?;
    let fail = failure_probability(p, cfg.a)?;
    let c = 3.0 * cfg.a * 2f64.sqrt();
    let log_p = (p as f64).ln();
    let sparsity = beta_star.iter().filter(|b| **b != 0.0).count();

    let (kappa, at_star) = if sparsity == 0 {
        (None, 0.0)
    } else {
        let k = kappa_re(design, sparsity, 5.0, cfg.kappa_budget, cfg.seed)?.value;
        let term = c * c * cfg.sigma * cfg.sigma * sparsity as f64 * log_p / (n as f64 * k * k);
        (Some(k), term)
    };
    let at_zero = design.prediction_error(beta_star, &vec![0.0; p])?;
    let bound = at_star.min(at_zero);
    let radius = noise_event_radius(cfg.sigma, p, n, cfg.a);
    let signal = design.predict(beta_star)?;
    let solver = SolverConfig {
        max_iters: 100_000,
        ..SolverConfig::default()
    };

    let outcomes: Vec<(f64, bool)> = (0..cfg.trials)
        .into_par_iter()
        .map(|k| -> Result<(f64, bool)> {
            let y = gaussian_response(design, beta_star, cfg.sigma, cfg.seed, k as u64)?;
            let m_inf = (0..p)
                .map(|j| ((0..n).map(|i| (y[i] - signal[i]) * design.x()[(i, j)]).sum::<f64>() / n as f64).abs())
                .fold(0.0, f64::max);
            let fit = if lambda > 0.0 {
                lasso_solve(design, &y, lambda, &solver)?.beta
            } else {
                beta_star.to_vec()
            };
            Ok((design.prediction_error(&fit, beta_star)?, m_inf <= radius))
        })
        .collect::<Result<_>>()?;

    // Equality cases (β̂ = 0 against a zero bound) need a rounding allowance.
    let tol = 1e-9 * bound + 1e-15;
    let mut violations = 0;
    let mut noise_event_count = 0;
    let mut violations_on_event = 0;
    for &(err, event) in &outcomes {
        let bad = err > bound + tol;
        violations += usize::from(bad);
        noise_event_count += usize::from(event);
        violations_on_event += usize::from(bad && event);
    }
    let errors: Vec<f64> = outcomes.iter().map(|o| o.0).collect();
    let violation_frac = violations as f64 / cfg.trials as f64;
    let wilson_slack = 3.0 * Wilson::new(violations, cfg.trials, 1.0).half_width;
    Ok(SharpOracleVerdict {
        trials: cfg.trials,
        p,
        n,
        lambda,
        sparsity,
        kappa,
        bound,
        violations,
        violation_frac,
        failure_probability: fail,
        wilson_slack,
        noise_event_count,
        violations_on_event,
        median_error: crate::stats::median(&errors),
        passed: violation_frac <= fail + wilson_slack && violations_on_event == 0,
    })
}

/// Reads `n p` on the first line, then `n` rows of `x_1 … x_p y` separated by commas or whitespace.
pub fn read_linear_csv(text: &str) -> Result<(LinearDesign<f64>, Vec<f64>)> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let fields = |l: &str| -> Vec<String> {
        l.split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(str::to_owned)
            .collect()
    };
    let (hl, header) = lines.next().ok_or_else(|| Error::parse(1, "missing header"))?;
    let h = fields(header);
    if h.len() != 2 {
        return Err(Error::parse(hl, "header must be `n p`"));
    }
    let n: usize = h[0].parse().map_err(|_| Error::parse(hl, "bad n"))?;
    let p: usize = h[1].parse().map_err(|_| Error::parse(hl, "bad p"))?;
    if n == 0 || p == 0 {
        return Err(Error::parse(hl, "n and p must be positive"));
    }
    let mut data = Vec::with_capacity(n * p);
    let mut y = Vec::with_capacity(n);
    for (ln, line) in lines {
        if y.len() == n {
            return Err(Error::parse(ln, "more rows than declared"));
        }
        let f = fields(line);
        if f.len() != p + 1 {
            return Err(Error::parse(
                ln,
                format!("expected {} fields, found {}", p + 1, f.len()),
            ));
        }
        let mut vals = Vec::with_capacity(p + 1);
        for s in &f {
            let v: f64 = s.parse().map_err(|_| Error::parse(ln, format!("bad number `{s}`")))?;
            if !v.is_finite() {
                return Err(Error::parse(ln, "non-finite value"));
            }
            vals.push(v);
        }
        y.push(vals[p]);
        data.extend_from_slice(&vals[..p]);
    }
    if y.len() != n {
        return Err(Error::parse(
            text.lines().count().max(1),
            format!("expected {n} rows, found {}", y.len()),
        ));
    }
    Ok((LinearDesign::new(DenseMatrix::from_row_major(n, p, data)?)?, y))
}
