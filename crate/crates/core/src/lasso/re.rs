//! Brute-force restricted-eigenvalue estimation at small `p`.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use super::LinearDesign;
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::rng::{trial_rng, TrialRng};
use crate::scalar::Real;

pub const MAX_P: usize = 16;
pub const MAX_S: usize = 3;
pub const MIN_BUDGET: usize = 1000;

const INNER_ITERS: usize = 400;
const OUTER_ITERS: usize = 60;

/// Result of [`kappa_re`]. The minimisation is nonconvex, so `value` is an upper estimate of `κ`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KappaEstimate<T> {
    pub value: T,
    pub upper_estimate: bool,
    pub subsets: usize,
    /// Minimising support `J`.
    pub support: Vec<usize>,
}

/// `κ(s, c0) = min_{|J| ≤ s} min_{|u_{Jᶜ}|₁ ≤ c0 |u_J|₁} |𝕏u|₂ / (√n |u_J|₂)`.
///
/// Every support is searched: `budget` random cone points, then alternating
/// descent from the best one (accelerated projected gradient over `u_{Jᶜ}`,
/// normalised gradient steps over `u_J`).
pub fn kappa_re<T: Real>(
    design: &LinearDesign<T>,
    s: usize,
    c0: T,
    budget: usize,
    seed: u64,
) -> Result<KappaEstimate<T>> {
    let p = design.p();
    if p > MAX_P {
        return Err(Error::invalid(format!("p = {p} exceeds the brute-force limit {MAX_P}")));
    }
    if s == 0 || s > MAX_S || s > p {
        return Err(Error::invalid(format!("s must lie in 1..={}", MAX_S.min(p))));
    }
    if budget < MIN_BUDGET {
        return Err(Error::invalid(format!("budget must be at least {MIN_BUDGET}")));
    }
    if !(c0 > T::zero()) || !c0.is_finite() {
        return Err(Error::invalid("c0 must be positive"));
    }
    let gram = design.gram();
    let lipschitz = T::lit(2.0)
        * (0..p)
            .map(|i| gram.row(i).iter().map(|x| x.abs()).sum::<T>())
            .fold(T::zero(), T::max)
            .max(T::epsilon());

    let supports = subsets_up_to(p, s);
    let best = supports
        .par_iter()
        .enumerate()
        .map(|(k, j)| {
            let f = search_support(&gram, j, c0, lipschitz, budget, seed, k as u64);
            (f, k)
        })
        .reduce_with(|a, b| if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a })
        .expect("at least one support");
    Ok(KappaEstimate {
        value: best.0.max(T::zero()).sqrt(),
        upper_estimate: true,
        subsets: supports.len(),
        support: supports[best.1].clone(),
    })
}

fn subsets_up_to(p: usize, s: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = Vec::new();
    for mask in 1u32..(1u32 << p) {
        if (mask.count_ones() as usize) <= s {
            out.push((0..p).filter(|&j| mask & (1 << j) != 0).collect());
        }
    }
    out.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    out
}

fn quad<T: Real>(g: &DenseMatrix<T>, u: &[T]) -> T {
    let gu = g.mul_vec(u).expect("shape");
    gu.iter().zip(u).map(|(&a, &b)| a * b).sum()
}

/// `min f(u) = uᵀGu / |u_J|²` over the cone for one support `J`.
fn search_support<T: Real>(
    g: &DenseMatrix<T>,
    support: &[usize],
    c0: T,
    lipschitz: T,
    budget: usize,
    seed: u64,
    index: u64,
) -> T {
    let p = g.rows();
    let off: Vec<usize> = (0..p).filter(|j| !support.contains(j)).collect();
    let mut rng = trial_rng(seed, index);

    let mut best_u = vec![T::zero(); p];
    let mut best_f = T::infinity();
    for draw in 0..budget {
        let mut u = vec![T::zero(); p];
        for &j in support {
            u[j] = normal(&mut rng);
        }
        let nj = support.iter().map(|&j| u[j] * u[j]).sum::<T>().sqrt();
        if nj == T::zero() {
            continue;
        }
        for &j in support {
            u[j] /= nj;
        }
        // A quarter of the draws sit on the support itself.
        if draw % 4 != 0 && !off.is_empty() {
            let radius = c0 * support.iter().map(|&j| u[j].abs()).sum::<T>() * T::lit(rng.random::<f64>());
            let mut w: Vec<T> = off.iter().map(|_| normal(&mut rng)).collect();
            let l1 = w.iter().map(|x| x.abs()).sum::<T>();
            if l1 > T::zero() {
                for (&j, wj) in off.iter().zip(&mut w) {
                    u[j] = *wj * radius / l1;
                }
            }
        }
        let f = quad(g, &u);
        if f < best_f {
            best_f = f;
            best_u = u;
        }
    }

    let mut u = best_u;
    let mut f = best_f;
    let mut step = lipschitz.recip();
    for _ in 0..OUTER_ITERS {
        f = minimise_off_support(g, &mut u, support, &off, c0, lipschitz).min(f);
        // Gradient of uᵀGu/|u_J|² on the support at |u_J| = 1.
        let gu = g.mul_vec(&u).expect("shape");
        let grad: Vec<T> = support.iter().map(|&j| T::lit(2.0) * (gu[j] - f * u[j])).collect();
        let mut improved = false;
        for _ in 0..20 {
            let mut cand = u.clone();
            for (&j, &d) in support.iter().zip(&grad) {
                cand[j] -= step * d;
            }
            let nj = support.iter().map(|&j| cand[j] * cand[j]).sum::<T>().sqrt();
            if nj == T::zero() {
                step /= T::lit(2.0);
                continue;
            }
            for x in &mut cand {
                *x /= nj;
            }
            project_off_support(&mut cand, support, &off, c0);
            let fc = quad(g, &cand);
            if fc < f {
                u = cand;
                f = fc;
                improved = true;
                break;
            }
            step /= T::lit(2.0);
        }
        if !improved {
            break;
        }
        step *= T::lit(2.0);
    }
    f
}

fn normal<T: Real>(rng: &mut TrialRng) -> T {
    T::lit(rng.sample::<f64, _>(StandardNormal))
}

/// FISTA on `w ↦ (u_J + w)ᵀ G (u_J + w)` over the ℓ1 ball of radius `c0 |u_J|₁`.
fn minimise_off_support<T: Real>(
    g: &DenseMatrix<T>,
    u: &mut [T],
    support: &[usize],
    off: &[usize],
    c0: T,
    lipschitz: T,
) -> T {
    if off.is_empty() {
        return quad(g, u);
    }
    let step = lipschitz.recip();
    let mut x = u.to_vec();
    let mut y = x.clone();
    let mut t = T::one();
    for _ in 0..INNER_ITERS {
        let gy = g.mul_vec(&y).expect("shape");
        let mut next = y.clone();
        for &j in off {
            next[j] -= step * T::lit(2.0) * gy[j];
        }
        project_off_support(&mut next, support, off, c0);
        let t_next = (T::one() + (T::one() + T::lit(4.0) * t * t).sqrt()) / T::lit(2.0);
        let momentum = (t - T::one()) / t_next;
        for &j in off {
            y[j] = next[j] + momentum * (next[j] - x[j]);
        }
        x = next;
        t = t_next;
    }
    let fx = quad(g, &x);
    if fx <= quad(g, u) {
        u.copy_from_slice(&x);
    }
    quad(g, u)
}

fn project_off_support<T: Real>(u: &mut [T], support: &[usize], off: &[usize], c0: T) {
    let radius = c0 * support.iter().map(|&j| u[j].abs()).sum::<T>();
    let mut w: Vec<T> = off.iter().map(|&j| u[j]).collect();
    project_l1_ball(&mut w, radius);
    for (&j, wj) in off.iter().zip(w) {
        u[j] = wj;
    }
}

/// Euclidean projection onto `{w : |w|₁ ≤ radius}` by the sort-and-threshold rule.
pub fn project_l1_ball<T: Real>(w: &mut [T], radius: T) {
    let l1: T = w.iter().map(|x| x.abs()).sum();
    if l1 <= radius {
        return;
    }
    if radius <= T::zero() {
        w.iter_mut().for_each(|x| *x = T::zero());
        return;
    }
    let mut mags: Vec<T> = w.iter().map(|x| x.abs()).collect();
    mags.sort_by(|a, b| b.partial_cmp(a).expect("finite"));
    let mut cum = T::zero();
    let mut theta = T::zero();
    for (k, &m) in mags.iter().enumerate() {
        cum += m;
        let cand = (cum - radius) / T::from_usize_lossy(k + 1);
        if m > cand {
            theta = cand;
        }
    }
    for x in w.iter_mut() {
        *x = x.signum() * (x.abs() - theta).max(T::zero());
    }
}
