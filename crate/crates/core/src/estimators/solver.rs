use crate::designs::ObservationSet;
use crate::error::{Error, Result};
use crate::linalg::{svd, trace_inner, DenseMatrix};
use crate::scalar::Real;

/// Proximal-gradient settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig<T> {
    pub max_iters: usize,
    pub rel_tol: T,
    /// `None` uses `1/L`, `L` the curvature of the quadratic part.
    pub step_size: Option<T>,
}

impl<T: Real> Default for SolverConfig<T> {
    fn default() -> Self {
        SolverConfig {
            max_iters: 5000,
            rel_tol: T::lit(1e-10),
            step_size: None,
        }
    }
}

impl<T: Real> SolverConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be positive"));
        }
        if !(self.rel_tol > T::zero()) {
            return Err(Error::invalid("rel_tol must be positive"));
        }
        if let Some(s) = self.step_size {
            if !(s > T::zero()) || !s.is_finite() {
                return Err(Error::invalid("step size must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverOutput<T> {
    pub estimate: DenseMatrix<T>,
    pub iterations: usize,
    pub objective: T,
    /// Objective after each iteration, starting with the value at `A = 0`.
    pub history: Vec<T>,
    pub converged: bool,
    /// Singular values of the estimate above zero after the last prox step.
    pub rank: usize,
}

/// Minimises `L_n(A) = ‖A‖²_{L2(Π)} − ⟨(2/n) Σ Y_i X_i, A⟩ + λ‖A‖₁` by proximal gradient.
///
/// Starts at `A = 0`. With the automatic step `1/L` on a completion design the
/// first iterate is already the closed-form solution. Stops once both the
/// relative objective decrease is below `rel_tol` and the relative iterate
/// change is below `√rel_tol`.
pub fn solve_penalized<T: Real>(obs: &ObservationSet<T>, lambda: T, cfg: &SolverConfig<T>) -> Result<SolverOutput<T>> {
    cfg.validate()?;
    if !(lambda > T::zero()) || !lambda.is_finite() {
        return Err(Error::invalid(format!("lambda must be positive, got {lambda}")));
    }
    let design = &obs.design;
    let (m1, m2) = obs.dims();
    let b = obs.mean_response_design();
    let two = T::lit(2.0);
    let step = match cfg.step_size {
        Some(s) => s,
        None => (two * design.gram_top_eigenvalue()?).recip(),
    };
    let iter_tol = cfg.rel_tol.sqrt();

    let mut a = DenseMatrix::zeros(m1, m2);
    let mut qa = DenseMatrix::zeros(m1, m2);
    let mut objective = T::zero();
    let mut history = vec![objective];
    let mut rank = 0;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        iterations += 1;
        // A − step·∇, with ∇ = 2Q(A) − 2B.
        let mut point = a.clone();
        point.axpy(-two * step, &qa);
        point.axpy(two * step, &b);
        if !point.is_finite() || !objective.is_finite() {
            return Err(Error::Divergence { iteration: iterations });
        }
        let f = svd(&point)?;
        let threshold = step * lambda;
        let (next, kept) = f.soft_threshold(threshold);
        let nuclear: T = f.sigma.iter().map(|&s| (s - threshold).max(T::zero())).sum();
        let q_next = design.gram_apply(&next)?;
        let next_obj = trace_inner(&next, &q_next)? - two * trace_inner(&b, &next)? + lambda * nuclear;
        if !next_obj.is_finite() || !next.is_finite() {
            return Err(Error::Divergence { iteration: iterations });
        }
        let change = next.sub(&a)?.frobenius_sq().sqrt();
        let scale = T::one() + next.frobenius_sq().sqrt();
        let decrease = objective - next_obj;
        let obj_scale = T::one().max(next_obj.abs());
        a = next;
        qa = q_next;
        objective = next_obj;
        rank = kept;
        history.push(objective);
        if decrease.abs() <= cfg.rel_tol * obj_scale && change <= iter_tol * scale {
            converged = true;
            break;
        }
    }
    Ok(SolverOutput {
        estimate: a,
        iterations,
        objective,
        history,
        converged,
        rank,
    })
}
