//! One-sided Jacobi SVD.
//!
//! Jacobi rotations are applied to the columns of the tall orientation of the
//! input until every pair of columns is numerically orthogonal. Singular values
//! come out with high relative accuracy, which matters here because rank
//! decisions are made by comparing singular values against thresholds.

use super::DenseMatrix;
use crate::error::{Error, Result};
use crate::scalar::Real;

const MAX_SWEEPS: usize = 80;

/// Full SVD `A = Σ_j σ_j u_j v_jᵀ` with `min(m1, m2)` terms.
#[derive(Clone, Debug)]
pub struct SvdFactors<T> {
    /// Nonincreasing, nonnegative.
    pub sigma: Vec<T>,
    /// `m1 × k` with orthonormal columns.
    pub u: DenseMatrix<T>,
    /// `m2 × k` with orthonormal columns.
    pub v: DenseMatrix<T>,
    pub rank_tol: T,
}

/// `max(m1, m2) · σ_1 · 1e-12`, floored at machine precision for narrow types.
pub fn default_rank_tol<T: Real>(rows: usize, cols: usize, sigma_max: T) -> T {
    let rel = T::lit(1e-12).max(T::epsilon());
    T::from_usize_lossy(rows.max(cols)) * sigma_max * rel
}

/// SVD with the default rank tolerance.
pub fn svd<T: Real>(a: &DenseMatrix<T>) -> Result<SvdFactors<T>> {
    svd_with_tol(a, None)
}

/// SVD with an explicit rank tolerance (`None` selects [`default_rank_tol`]).
pub fn svd_with_tol<T: Real>(a: &DenseMatrix<T>, rank_tol: Option<T>) -> Result<SvdFactors<T>> {
    if let Some(tol) = rank_tol {
        if !(tol >= T::zero()) {
            return Err(Error::invalid("rank_tol must be nonnegative"));
        }
    }
    if !a.is_finite() {
        return Err(Error::NonFinite("svd input"));
    }
    let (m1, m2) = a.shape();
    // Power-of-two rescaling is exact and keeps squared column norms in range.
    let peak = a.max_abs();
    let scale = if peak > T::zero() {
        T::lit(2.0).powi(peak.log2().round().to_i32().unwrap_or(0))
    } else {
        T::one()
    };
    let scaled = a.scaled(scale.recip());
    let (mut sigma, u, v) = if m1 >= m2 {
        jacobi_tall(&scaled)?
    } else {
        let (s, u, v) = jacobi_tall(&scaled.transpose())?;
        (s, v, u)
    };
    for s in &mut sigma {
        *s *= scale;
    }
    let sigma_max = sigma.first().copied().unwrap_or_else(T::zero);
    let rank_tol = rank_tol.unwrap_or_else(|| default_rank_tol(m1, m2, sigma_max));
    Ok(SvdFactors { sigma, u, v, rank_tol })
}

/// Returns `(σ, U, V)` for `m ≥ n`, `U` is `m×n`, `V` is `n×n`.
#[allow(clippy::type_complexity)]
fn jacobi_tall<T: Real>(a: &DenseMatrix<T>) -> Result<(Vec<T>, DenseMatrix<T>, DenseMatrix<T>)> {
    let (m, n) = a.shape();
    debug_assert!(m >= n);
    let mut w: Vec<Vec<T>> = (0..n).map(|j| a.column(j)).collect();
    let mut vcols: Vec<Vec<T>> = (0..n)
        .map(|j| {
            let mut e = vec![T::zero(); n];
            e[j] = T::one();
            e
        })
        .collect();

    let tol = T::epsilon() * T::from_usize_lossy(m);
    // Columns below this squared norm are rounding residue; rotating them never settles.
    let floor = {
        let e = T::epsilon() * a.frobenius_sq().sqrt();
        e * e
    };
    let mut converged = n < 2;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let (alpha, beta, gamma) = {
                    let (wp, wq) = (&w[p], &w[q]);
                    let mut alpha = T::zero();
                    let mut beta = T::zero();
                    let mut gamma = T::zero();
                    for (&x, &y) in wp.iter().zip(wq) {
                        alpha += x * x;
                        beta += y * y;
                        gamma += x * y;
                    }
                    (alpha, beta, gamma)
                };
                if gamma == T::zero() || alpha.min(beta) <= floor || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::lit(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                rotate(&mut w, p, q, c, s);
                rotate(&mut vcols, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
        }
    }
    if !converged {
        return Err(Error::SvdNoConvergence { sweeps: MAX_SWEEPS });
    }

    let norms: Vec<T> = w
        .iter()
        .map(|col| col.iter().map(|&x| x * x).sum::<T>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).expect("finite norms"));

    let sigma: Vec<T> = order.iter().map(|&j| norms[j]).collect();
    let sigma_max = sigma.first().copied().unwrap_or_else(T::zero);
    // Columns this small carry no usable direction; their u_j is rebuilt below.
    let negligible = sigma_max * T::epsilon() * T::from_usize_lossy(m);

    let mut ucols: Vec<Vec<T>> = Vec::with_capacity(n);
    let mut pending = Vec::new();
    for (k, &j) in order.iter().enumerate() {
        if sigma[k] > negligible && sigma[k] > T::zero() {
            let inv = T::one() / sigma[k];
            ucols.push(w[j].iter().map(|&x| x * inv).collect());
        } else {
            ucols.push(Vec::new());
            pending.push(k);
        }
    }
    for k in pending {
        let others: Vec<&Vec<T>> = ucols.iter().filter(|c| !c.is_empty()).collect();
        let fresh = orthonormal_complement(m, &others);
        ucols[k] = fresh;
    }

    let u = DenseMatrix::from_fn(m, n, |i, k| ucols[k][i]);
    let v = DenseMatrix::from_fn(n, n, |i, k| vcols[order[k]][i]);
    Ok((sigma, u, v))
}

fn rotate<T: Real>(cols: &mut [Vec<T>], p: usize, q: usize, c: T, s: T) {
    let (lo, hi) = cols.split_at_mut(q);
    for (x, y) in lo[p].iter_mut().zip(hi[0].iter_mut()) {
        let (xp, xq) = (*x, *y);
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}

/// Unit vector orthogonal to every vector in `basis` (which must span less than `R^m`).
fn orthonormal_complement<T: Real>(m: usize, basis: &[&Vec<T>]) -> Vec<T> {
    let mut best: Option<(T, Vec<T>)> = None;
    for k in 0..m {
        let mut x = vec![T::zero(); m];
        x[k] = T::one();
        // Two passes of Gram-Schmidt.
        for _ in 0..2 {
            for b in basis {
                let d: T = x.iter().zip(b.iter()).map(|(&a, &c)| a * c).sum();
                for (xi, &bi) in x.iter_mut().zip(b.iter()) {
                    *xi -= d * bi;
                }
            }
        }
        let nrm = x.iter().map(|&a| a * a).sum::<T>().sqrt();
        if best.as_ref().is_none_or(|(bn, _)| nrm > *bn) {
            best = Some((nrm, x));
        }
        if nrm > T::lit(0.5) {
            break;
        }
    }
    let (nrm, mut x) = best.expect("m >= 1");
    for xi in &mut x {
        *xi /= nrm;
    }
    x
}

impl<T: Real> SvdFactors<T> {
    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.u.rows(), self.v.rows())
    }

    /// `#{j : σ_j > rank_tol}`.
    pub fn numerical_rank(&self) -> usize {
        self.sigma.iter().filter(|&&s| s > self.rank_tol).count()
    }

    pub fn u_col(&self, j: usize) -> Vec<T> {
        self.u.column(j)
    }

    pub fn v_col(&self, j: usize) -> Vec<T> {
        self.v.column(j)
    }

    /// `Σ_j f(σ_j) u_j v_jᵀ`; terms with `f(σ_j) = 0` are skipped.
    pub fn reconstruct_with(&self, f: impl Fn(T) -> T) -> DenseMatrix<T> {
        let (m1, m2) = self.shape();
        let mut out = DenseMatrix::zeros(m1, m2);
        for (j, &s) in self.sigma.iter().enumerate() {
            let w = f(s);
            if w == T::zero() {
                continue;
            }
            let uj = self.u_col(j);
            let vj = self.v_col(j);
            let data = out.as_mut_slice();
            for (i, &ui) in uj.iter().enumerate() {
                let scale = w * ui;
                if scale == T::zero() {
                    continue;
                }
                let row = &mut data[i * m2..(i + 1) * m2];
                for (r, &vk) in row.iter_mut().zip(&vj) {
                    *r += scale * vk;
                }
            }
        }
        out
    }

    pub fn reconstruct(&self) -> DenseMatrix<T> {
        self.reconstruct_with(|s| s)
    }

    /// Best rank-`k` approximation (Eckart–Young).
    pub fn truncate(&self, k: usize) -> DenseMatrix<T> {
        let (m1, m2) = self.shape();
        let mut out = DenseMatrix::zeros(m1, m2);
        for j in 0..k.min(self.len()) {
            out.axpy(self.sigma[j], &DenseMatrix::outer(&self.u_col(j), &self.v_col(j)));
        }
        out
    }

    /// `Σ_j (σ_j − t)_+ u_j v_jᵀ` and the number of strictly surviving terms.
    /// `σ_j == t` maps to zero.
    pub fn soft_threshold(&self, threshold: T) -> (DenseMatrix<T>, usize) {
        let kept = self.sigma.iter().filter(|&&s| s > threshold).count();
        let m = self.reconstruct_with(|s| if s > threshold { s - threshold } else { T::zero() });
        (m, kept)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random(rows: usize, cols: usize, seed: u64) -> DenseMatrix<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        DenseMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    fn orthonormality_defect(q: &DenseMatrix<f64>) -> f64 {
        let g = q.transpose().matmul(q).unwrap();
        g.sub(&DenseMatrix::identity(g.rows())).unwrap().max_abs()
    }

    #[test]
    fn diagonal_matrix() {
        let a = DenseMatrix::from_diag(2, 2, &[3.0, 2.0]);
        let f = svd(&a).unwrap();
        assert_eq!(f.sigma, vec![3.0, 2.0]);
        assert_eq!(f.numerical_rank(), 2);
    }

    #[test]
    fn zero_matrix_has_rank_zero_and_orthonormal_factors() {
        let f = svd(&DenseMatrix::<f64>::zeros(3, 4)).unwrap();
        assert_eq!(f.sigma, vec![0.0; 3]);
        assert_eq!(f.numerical_rank(), 0);
        assert!(orthonormality_defect(&f.u) < 1e-12);
        assert!(orthonormality_defect(&f.v) < 1e-12);
    }

    #[test]
    fn rank_two_from_known_factors() {
        let u = random(5, 2, 1);
        let v = random(3, 2, 2);
        let a = u.matmul(&v.transpose()).unwrap();
        let f = svd(&a).unwrap();
        assert!(f.sigma[2] <= 1e-10 * f.sigma[0]);
        assert_eq!(f.numerical_rank(), 2);
        assert!(orthonormality_defect(&f.u) < 1e-10);
        assert!(orthonormality_defect(&f.v) < 1e-10);
    }

    #[test]
    fn reconstruction_and_ordering_on_random_shapes() {
        for (k, &(r, c)) in [(1, 1), (1, 6), (6, 1), (7, 4), (4, 7), (12, 12), (30, 17)]
            .iter()
            .enumerate()
        {
            let a = random(r, c, 10 + k as u64);
            let f = svd(&a).unwrap();
            assert_eq!(f.len(), r.min(c));
            assert!(f.sigma.windows(2).all(|w| w[0] >= w[1]));
            let rec = f.reconstruct();
            let rel = rec.sub(&a).unwrap().frobenius_sq().sqrt() / a.frobenius_sq().sqrt();
            assert!(rel < 1e-10, "{r}x{c}: relative error {rel}");
            assert!(orthonormality_defect(&f.u) < 1e-10);
            assert!(orthonormality_defect(&f.v) < 1e-10);
        }
    }

    #[test]
    fn works_in_single_precision() {
        let a: DenseMatrix<f32> = random(6, 4, 3).cast();
        let f = svd(&a).unwrap();
        let rec = f.reconstruct();
        let rel = rec.sub(&a).unwrap().frobenius_sq().sqrt() / a.frobenius_sq().sqrt();
        assert!(rel < 1e-5);
    }

    #[test]
    fn negative_rank_tol_rejected() {
        assert!(svd_with_tol(&DenseMatrix::<f64>::identity(2), Some(-1.0)).is_err());
    }

    #[test]
    fn soft_threshold_boundary_is_zero() {
        let a = DenseMatrix::from_diag(2, 2, &[5.0, 2.0]);
        let (m, kept) = svd(&a).unwrap().soft_threshold(2.0);
        assert_eq!(kept, 1);
        assert_eq!(m.as_slice(), &[3.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn extreme_scales() {
        let base = DenseMatrix::<f64>::from_rows(&[vec![3.0, 1.0], vec![-2.0, 4.0], vec![0.5, 0.0]]).unwrap();
        let ref_sigma = svd(&base).unwrap().sigma;
        for scale in [1e300, 1e-300] {
            let f = svd(&base.scaled(scale)).unwrap();
            for (s, r) in f.sigma.iter().zip(&ref_sigma) {
                assert!((s / scale - r).abs() <= 1e-12 * r);
            }
        }
    }

    #[test]
    fn constant_matrices_converge() {
        for (m1, m2) in [(6, 9), (9, 6), (5, 5), (1, 7), (17, 3)] {
            let a = DenseMatrix::<f64>::from_fn(m1, m2, |_, _| 0.7);
            let f = svd(&a).unwrap();
            assert_eq!(f.numerical_rank(), 1);
            assert!((f.sigma[0] - 0.7 * ((m1 * m2) as f64).sqrt()).abs() < 1e-12);
            assert!(f.reconstruct().sub(&a).unwrap().max_abs() < 1e-12);
        }
    }
}
