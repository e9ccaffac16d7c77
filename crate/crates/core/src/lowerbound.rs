//! Packing families and Kullback–Leibler divergences behind the minimax lower bounds.

use std::collections::BTreeSet;
use std::path::Path;

use rand::Rng;
use serde::Serialize;

use crate::designs::{l2_pi_norm_sq, Design};
use crate::error::{Error, Result};
use crate::linalg::text::write_matrix_text;
use crate::linalg::{svd, DenseMatrix};
use crate::rng::rng_from_seed;
use crate::scalar::Real;

pub const DEFAULT_MAX_ATTEMPTS: usize = 100_000;
pub const DEFAULT_ALPHA: f64 = 1.0 / 16.0;

/// Noise regime that fixes the entry amplitude.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PackingScale {
    /// Entries `γ(σ∧a)√(μ²r/(m2 n))`; the noise is `N(0, σ²)`.
    Gaussian { sigma: f64, a: f64 },
    /// Entries `γη√(μ²r/(m2 n))`; responses are `±η`.
    Bounded { eta: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PackingConfig {
    pub m1: usize,
    pub m2: usize,
    pub r: usize,
    pub n: usize,
    pub gamma: f64,
    /// `μ`; `√(m1 m2)` for uniform completion.
    pub mu: f64,
    pub scale: PackingScale,
}

impl PackingConfig {
    pub fn completion(m1: usize, m2: usize, r: usize, n: usize, gamma: f64, scale: PackingScale) -> Self {
        PackingConfig {
            m1,
            m2,
            r,
            n,
            gamma,
            mu: ((m1 * m2) as f64).sqrt(),
            scale,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m1 == 0 || self.m2 == 0 || self.n == 0 {
            return Err(Error::invalid("m1, m2 and n must be positive"));
        }
        if self.r == 0 || self.r > self.m2 {
            return Err(Error::invalid(format!("rank must lie in 1..={}", self.m2)));
        }
        if self.m1 * self.r > 64 {
            return Err(Error::invalid(format!(
                "tile has {} cells; at most 64 are supported",
                self.m1 * self.r
            )));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::invalid(format!("gamma must lie in (0, 1], got {}", self.gamma)));
        }
        if !(self.mu > 0.0) || !self.mu.is_finite() {
            return Err(Error::invalid("mu must be positive"));
        }
        let amp = self.amplitude();
        match self.scale {
            PackingScale::Gaussian { sigma, a } => {
                if !(sigma > 0.0) || !(a > 0.0) {
                    return Err(Error::invalid("sigma and a must be positive"));
                }
                if amp > a {
                    return Err(Error::invalid(format!("amplitude {amp} exceeds a = {a}")));
                }
            }
            PackingScale::Bounded { eta } => {
                if !(eta > 0.0) {
                    return Err(Error::invalid("eta must be positive"));
                }
                if amp > eta / 2.0 {
                    return Err(Error::invalid(format!("amplitude {amp} exceeds eta/2 = {}", eta / 2.0)));
                }
            }
        }
        Ok(())
    }

    fn base(&self) -> f64 {
        let level = match self.scale {
            PackingScale::Gaussian { sigma, a } => sigma.min(a),
            PackingScale::Bounded { eta } => eta,
        };
        level * (self.mu * self.mu * self.r as f64 / (self.m2 as f64 * self.n as f64)).sqrt()
    }

    pub fn amplitude(&self) -> f64 {
        self.gamma * self.base()
    }

    /// Largest `γ ≤ 1` keeping the amplitude admissible.
    pub fn max_gamma(&self) -> f64 {
        let cap = match self.scale {
            PackingScale::Gaussian { a, .. } => a,
            PackingScale::Bounded { eta } => eta / 2.0,
        };
        (cap / self.base()).min(1.0)
    }

    pub fn tile_cells(&self) -> usize {
        self.m1 * self.r
    }

    /// `r m1 / 8`.
    pub fn target_log2_card(&self) -> f64 {
        self.tile_cells() as f64 / 8.0
    }

    /// `⌈2^{r m1/8}⌉ + 1`.
    pub fn target_cardinality(&self) -> usize {
        2f64.powf(self.target_log2_card()).ceil() as usize + 1
    }

    /// Smallest admissible tile Hamming distance, `⌈m1 r/8⌉`.
    pub fn min_hamming(&self) -> u32 {
        (self.tile_cells() as f64 / 8.0).ceil() as u32
    }

    /// `(γ²/16)(σ∧a)² μ² m1 r / n`, or the same with `η` in the bounded case.
    pub fn separation_bound(&self) -> f64 {
        let level = match self.scale {
            PackingScale::Gaussian { sigma, a } => sigma.min(a),
            PackingScale::Bounded { eta } => eta,
        };
        self.gamma * self.gamma / 16.0 * level * level * self.mu * self.mu * (self.m1 * self.r) as f64 / self.n as f64
    }
}

/// Tiles of a packing, as bitmasks over the `m1 × r` cells in row-major order.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Packing {
    pub config: PackingConfig,
    /// Sorted ascending; the zero tile comes first.
    pub tiles: Vec<u64>,
    pub attempts: usize,
}

/// Greedy Varshamov–Gilbert selection of binary tiles with pairwise Hamming distance `≥ m1 r/8`.
pub fn build_packing(cfg: &PackingConfig, seed: u64, max_attempts: usize) -> Result<Packing> {
    cfg.validate()?;
    let cells = cfg.tile_cells();
    let mask = if cells == 64 { u64::MAX } else { (1u64 << cells) - 1 };
    let target = cfg.target_cardinality();
    let dmin = cfg.min_hamming();
    if (target as u128) > (1u128 << cells) {
        return Err(Error::PackingShortfall {
            achieved: 1,
            target,
            attempts: 0,
        });
    }
    let mut rng = rng_from_seed(seed);
    let mut chosen = vec![0u64];
    let mut attempts = 0;
    while chosen.len() < target && attempts < max_attempts {
        attempts += 1;
        let cand = rng.random::<u64>() & mask;
        if chosen.iter().all(|&t| (t ^ cand).count_ones() >= dmin) {
            chosen.push(cand);
        }
    }
    if chosen.len() < target {
        return Err(Error::PackingShortfall {
            achieved: chosen.len(),
            target,
            attempts,
        });
    }
    chosen.sort_unstable();
    Ok(Packing {
        config: *cfg,
        tiles: chosen,
        attempts,
    })
}

impl Packing {
    pub fn cardinality(&self) -> usize {
        self.tiles.len()
    }

    pub fn amplitude(&self) -> f64 {
        self.config.amplitude()
    }

    /// Block matrix `(Ã | … | Ã | O)` for one tile.
    pub fn matrix(&self, tile: u64) -> DenseMatrix<f64> {
        let PackingConfig { m1, m2, r, .. } = self.config;
        let amp = self.amplitude();
        let filled = r * (m2 / r);
        DenseMatrix::from_fn(m1, m2, |i, j| {
            if j >= filled {
                return 0.0;
            }
            let bit = i * r + j % r;
            if tile >> bit & 1 == 1 {
                amp
            } else {
                0.0
            }
        })
    }

    pub fn matrices(&self) -> Vec<DenseMatrix<f64>> {
        self.tiles.iter().map(|&t| self.matrix(t)).collect()
    }

    pub fn min_pairwise_hamming(&self) -> u32 {
        let mut best = u32::MAX;
        for (k, &a) in self.tiles.iter().enumerate() {
            for &b in &self.tiles[k + 1..] {
                best = best.min((a ^ b).count_ones());
            }
        }
        best
    }

    /// `‖A_k − A_l‖₂² = d_H · amplitude² · ⌊m2/r⌋`.
    pub fn min_pairwise_frob_sq(&self) -> f64 {
        let amp = self.amplitude();
        f64::from(self.min_pairwise_hamming()) * amp * amp * (self.config.m2 / self.config.r) as f64
    }

    /// Same packing with a different `γ`. The tiles do not depend on it.
    pub fn with_gamma(&self, gamma: f64) -> Result<Packing> {
        let config = PackingConfig { gamma, ..self.config };
        config.validate()?;
        Ok(Packing { config, ..self.clone() })
    }

    /// `(1/(Card−1)) Σ_A K(P_0, P_A)`.
    pub fn mean_kl(&self, design: &Design<f64>) -> Result<f64> {
        let mut total = 0.0;
        for &t in &self.tiles {
            if t == 0 {
                continue;
            }
            let a = self.matrix(t);
            total += match self.config.scale {
                PackingScale::Gaussian { sigma, .. } => kl_gaussian(&a, design, sigma, self.config.n)?,
                PackingScale::Bounded { eta } => kl_sign(&a, eta, self.config.n)?.kl,
            };
        }
        Ok(total / (self.cardinality() - 1) as f64)
    }

    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (k, a) in self.matrices().iter().enumerate() {
            std::fs::write(dir.join(format!("matrix_{k:04}.txt")), write_matrix_text(a))?;
        }
        let index = PackingIndex {
            cardinality: self.cardinality(),
            amplitude: self.amplitude(),
            gamma: self.config.gamma,
            min_pairwise_frob_sq: self.min_pairwise_frob_sq(),
        };
        std::fs::write(dir.join("index.json"), serde_json::to_string_pretty(&index)? + "\n")?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PackingIndex {
    pub cardinality: usize,
    pub amplitude: f64,
    pub gamma: f64,
    pub min_pairwise_frob_sq: f64,
}

/// Largest `γ` in `(0, max_gamma]` with `(1/(Card−1)) Σ K(P_0, P_A) ≤ α log(Card−1)`, by bisection.
///
/// Returns the packing rescaled to that `γ`.
pub fn solve_gamma(packing: &Packing, design: &Design<f64>, alpha: f64) -> Result<Packing> {
    if !(alpha > 0.0) {
        return Err(Error::invalid("alpha must be positive"));
    }
    let card = packing.cardinality();
    if card < 3 {
        return Err(Error::invalid("need at least three elements so that log(Card - 1) > 0"));
    }
    let budget = alpha * ((card - 1) as f64).ln();
    let ok = |g: f64| -> Result<bool> { Ok(packing.with_gamma(g)?.mean_kl(design)? <= budget) };
    let hi_cap = packing.config.max_gamma();
    if ok(hi_cap)? {
        return packing.with_gamma(hi_cap);
    }
    let (mut lo, mut hi) = (0.0, hi_cap);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if ok(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if lo == 0.0 {
        return Err(Error::invalid("no positive gamma satisfies the KL condition"));
    }
    packing.with_gamma(lo)
}

/// `K(P_0, P_A) = (n/(2σ²))‖A‖²_{L2(Π)}` for Gaussian noise.
pub fn kl_gaussian<T: Real>(a: &DenseMatrix<T>, design: &Design<T>, sigma: T, n: usize) -> Result<T> {
    if !(sigma > T::zero()) || !sigma.is_finite() {
        return Err(Error::invalid("sigma must be positive"));
    }
    let norm = l2_pi_norm_sq(a, design)?;
    Ok(T::from_usize_lossy(n) / (T::lit(2.0) * sigma * sigma) * norm)
}

/// Exact and bounding values of `K(P_0, P_A)` for `±η` responses.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SignKl<T> {
    /// `n E[p_0 log(p_0/p_A) + (1−p_0) log((1−p_0)/(1−p_A))]`, `X` uniform over the basis.
    pub kl: T,
    /// `(n/(2η²))‖A‖²_{L2(Π_0)}`.
    pub quadratic_bound: T,
    pub quadratic_bound_holds: bool,
    /// `n E[(p_0 − p_A)²/(p_A(1 − p_A))]`, the χ² divergence; always dominates `kl`.
    pub chi_square_bound: T,
}

/// Exact KL between `n` samples of the `±η` model at `0` and at `A`, `p_A(X) = 1/2 + ⟨A,X⟩/(2η)`.
///
/// Requires `max|a_ij| ≤ η/2` so that `p_A ∈ [1/4, 3/4]`. On that range the
/// exact value can exceed the quadratic bound by a factor up to `−4 log(3/4)`.
pub fn kl_sign<T: Real>(a: &DenseMatrix<T>, eta: T, n: usize) -> Result<SignKl<T>> {
    if !(eta > T::zero()) || !eta.is_finite() {
        return Err(Error::invalid("eta must be positive"));
    }
    if !a.is_finite() {
        return Err(Error::NonFinite("matrix"));
    }
    let half = T::lit(0.5);
    if a.max_abs() > eta * half {
        return Err(Error::invalid(format!(
            "entries must satisfy |a_ij| <= eta/2 = {}, found {}",
            eta * half,
            a.max_abs()
        )));
    }
    let cells = T::from_usize_lossy(a.rows() * a.cols());
    let nn = T::from_usize_lossy(n);
    let mut kl = T::zero();
    let mut chi = T::zero();
    for &v in a.as_slice() {
        let pa = half + v / (T::lit(2.0) * eta);
        let d = half - pa;
        kl += half * (half / pa).ln() + half * (half / (T::one() - pa)).ln();
        chi += d * d / (pa * (T::one() - pa));
    }
    let kl = nn * kl / cells;
    let chi_square_bound = nn * chi / cells;
    let quadratic_bound = nn / (T::lit(2.0) * eta * eta) * a.frobenius_sq() / cells;
    Ok(SignKl {
        kl,
        quadratic_bound,
        quadratic_bound_holds: kl <= quadratic_bound,
        chi_square_bound,
    })
}

/// Distinct ranks of all pairwise differences, via SVD.
pub fn pairwise_difference_ranks(mats: &[DenseMatrix<f64>]) -> Result<BTreeSet<usize>> {
    let mut ranks = BTreeSet::new();
    for (k, a) in mats.iter().enumerate() {
        for b in &mats[k + 1..] {
            ranks.insert(svd(&a.sub(b)?)?.numerical_rank());
        }
    }
    Ok(ranks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::designs::{sample_observations, NoiseModel};

    fn gauss(m1: usize, m2: usize, r: usize, n: usize) -> PackingConfig {
        PackingConfig::completion(m1, m2, r, n, 0.5, PackingScale::Gaussian { sigma: 1.0, a: 1.0 })
    }

    #[test]
    fn sixteen_by_one_targets_five() {
        let cfg = gauss(16, 8, 1, 10_000);
        assert_eq!(cfg.target_cardinality(), 5);
        let p = build_packing(&cfg, 1, DEFAULT_MAX_ATTEMPTS).unwrap();
        assert_eq!(p.cardinality(), 5);
        assert_eq!(p.tiles[0], 0);
        assert!(p.tiles.windows(2).all(|w| w[0] < w[1]));
        for (k, &a) in p.tiles.iter().enumerate() {
            for &b in &p.tiles[k + 1..] {
                assert!((a ^ b).count_ones() >= 2);
            }
        }
    }

    #[test]
    fn block_structure_rank_and_separation() {
        let cfg = gauss(8, 7, 2, 5_000);
        let p = build_packing(&cfg, 3, DEFAULT_MAX_ATTEMPTS).unwrap();
        let mats = p.matrices();
        let amp = p.amplitude();
        for a in &mats {
            assert!(svd(a).unwrap().numerical_rank() <= 2);
            assert!(a.as_slice().iter().all(|&v| v == 0.0 || v == amp));
            for i in 0..8 {
                assert_eq!(a[(i, 6)], 0.0);
                for j in 0..6 {
                    assert_eq!(a[(i, j)], a[(i, j % 2)]);
                }
            }
        }
        assert!(pairwise_difference_ranks(&mats).unwrap().iter().all(|&r| r <= 2));
        for (k, a) in mats.iter().enumerate() {
            for b in &mats[k + 1..] {
                let d = a.sub(b).unwrap().frobenius_sq();
                assert!(d >= cfg.separation_bound() * (1.0 - 1e-12));
                assert!(d >= p.min_pairwise_frob_sq() * (1.0 - 1e-12));
            }
        }
    }

    #[test]
    fn shortfall_is_reported() {
        let cfg = gauss(16, 8, 4, 100_000);
        let err = build_packing(&cfg, 0, 3).unwrap_err();
        assert!(matches!(err, Error::PackingShortfall { attempts: 3, .. }), "{err}");
    }

    #[test]
    fn invalid_amplitude_rejected() {
        let cfg = PackingConfig::completion(8, 8, 1, 1, 1.0, PackingScale::Bounded { eta: 1.0 });
        assert!(cfg.validate().is_err());
        assert!(gauss(8, 8, 9, 100).validate().is_err());
    }

    #[test]
    fn gaussian_kl_formula() {
        let d = Design::<f64>::usr(3, 4);
        let a = DenseMatrix::from_fn(3, 4, |i, j| (i as f64 - j as f64) * 0.1);
        assert_eq!(kl_gaussian(&DenseMatrix::zeros(3, 4), &d, 1.0, 10).unwrap(), 0.0);
        let k1 = kl_gaussian(&a, &d, 0.5, 10).unwrap();
        let k2 = kl_gaussian(&a.scaled(2.0), &d, 0.5, 10).unwrap();
        assert!((k2 - 4.0 * k1).abs() < 1e-14);
        assert!((k1 - 10.0 / 0.5 * a.frobenius_sq() / 12.0).abs() < 1e-14);
    }

    #[test]
    fn gaussian_kl_monte_carlo() {
        // Average log-likelihood ratio log(p_0/p_A) of n-sample draws under P_0.
        let (m1, m2, n, sigma) = (3, 3, 4, 0.7);
        let d = Design::<f64>::usr(m1, m2);
        let a = DenseMatrix::from_fn(m1, m2, |i, j| 0.3 * (i + 2 * j) as f64 - 0.5);
        let zero = DenseMatrix::zeros(m1, m2);
        let reps = 40_000;
        let mut vals = Vec::with_capacity(reps);
        for k in 0..reps {
            let obs = sample_observations(&zero, &d, &NoiseModel::Gaussian { sigma }, n, k as u64).unwrap();
            let llr: f64 = obs
                .entries()
                .unwrap()
                .iter()
                .map(|e| {
                    let fa = a[(e.row, e.col)];
                    ((e.y - fa).powi(2) - e.y * e.y) / (2.0 * sigma * sigma)
                })
                .sum();
            vals.push(llr);
        }
        let mean = vals.iter().sum::<f64>() / reps as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
        let se = (var / reps as f64).sqrt();
        let exact = kl_gaussian(&a, &d, sigma, n).unwrap();
        assert!((mean - exact).abs() <= 3.0 * se, "{mean} vs {exact} (se {se})");
    }

    #[test]
    fn sign_kl_exact_values() {
        let z = kl_sign(&DenseMatrix::<f64>::zeros(2, 2), 1.0, 5).unwrap();
        assert_eq!((z.kl, z.quadratic_bound), (0.0, 0.0));
        assert!(z.quadratic_bound_holds);
        let a = DenseMatrix::from_fn(2, 3, |i, j| 0.05 * (i + j) as f64);
        let k1 = kl_sign(&a, 1.0, 7).unwrap();
        let k2 = kl_sign(&a, 1.0, 14).unwrap();
        assert!((k2.kl - 2.0 * k1.kl).abs() < 1e-14);
        // Independent per-cell value: KL(Ber(1/2) ‖ Ber(1/2+d)) = −½ log(1 − 4d²).
        let direct: f64 = a.as_slice().iter().map(|v| -0.5 * (1.0 - v * v).ln()).sum::<f64>() * 7.0 / 6.0;
        assert!((k1.kl - direct).abs() < 1e-14);
        assert!(k1.kl <= k1.chi_square_bound);
        assert!(kl_sign(&a, 0.1, 1).is_err());
    }

    #[test]
    fn sign_kl_quadratic_bound_is_not_universal() {
        // At the edge p_A = 3/4 the exact value is −½ log(3/4) per cell against the bound 1/8.
        let a = DenseMatrix::from_fn(1, 1, |_, _| 0.5);
        let k = kl_sign(&a, 1.0, 1).unwrap();
        assert!((k.kl - (-0.5 * 0.75f64.ln())).abs() < 1e-15);
        assert!((k.quadratic_bound - 0.125).abs() < 1e-15);
        assert!(!k.quadratic_bound_holds);
        assert!((k.kl / k.quadratic_bound - (-4.0 * 0.75f64.ln())).abs() < 1e-12);
        let small = kl_sign(&a.scaled(0.02), 1.0, 1).unwrap();
        assert!(small.kl > small.quadratic_bound);
    }

    #[test]
    fn gamma_bisection_meets_condition() {
        let cfg = gauss(16, 8, 1, 2_000);
        let p = build_packing(&cfg, 7, DEFAULT_MAX_ATTEMPTS).unwrap();
        let d = Design::usr(16, 8);
        let solved = solve_gamma(&p, &d, DEFAULT_ALPHA).unwrap();
        let budget = DEFAULT_ALPHA * 4f64.ln();
        let mean = solved.mean_kl(&d).unwrap();
        assert!(mean <= budget);
        assert!(mean >= budget * (1.0 - 1e-9), "{mean} {budget}");
        // KL is quadratic in γ for Gaussian noise.
        let g = solved.config.gamma;
        let probe = p.with_gamma(0.5).unwrap().mean_kl(&d).unwrap();
        assert!((g - 0.5 * (budget / probe).sqrt()).abs() < 1e-9);
    }

    #[test]
    fn dump_directory() {
        let cfg = gauss(16, 4, 1, 1_000);
        let p = build_packing(&cfg, 2, DEFAULT_MAX_ATTEMPTS).unwrap();
        let dir = tempfile::tempdir().unwrap();
        p.write_dir(dir.path()).unwrap();
        let idx: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("index.json")).unwrap()).unwrap();
        assert_eq!(idx["cardinality"], 5);
        for key in ["amplitude", "gamma", "min_pairwise_frob_sq"] {
            assert!(idx[key].is_number());
        }
        let back: DenseMatrix<f64> = crate::linalg::text::read_matrix_text(
            &std::fs::read_to_string(dir.path().join("matrix_0000.txt")).unwrap(),
        )
        .unwrap();
        assert_eq!(back.max_abs(), 0.0);
    }
}
