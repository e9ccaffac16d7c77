//! Sampling designs, noise models, synthetic ground truth and the `L2(Π)` geometry.
//!
//! Observations follow `Y_i = ⟨X_i, A0⟩ + ξ_i`. The distribution `Π` of the
//! design matrices is always known exactly here, so `‖A‖²_{L2(Π)}` is computed
//! in closed form rather than estimated.

mod io;

pub use io::{read_observations, read_observations_file, write_observations, write_observations_file};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{svd, trace_inner, DenseMatrix};
use crate::rng::{rng_from_seed, TrialRng};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignKind {
    UsrCompletion,
    ColumnMask,
    GaussianFull,
    RademacherFull,
    Fixed,
}

/// Distribution of the design matrices `X_i`.
#[derive(Clone, Debug, PartialEq)]
pub enum Design<T> {
    /// `X_i` i.i.d. uniform over the basis `{e_j e_kᵀ}`, drawn with replacement.
    UsrCompletion { m1: usize, m2: usize },
    /// One column, chosen uniformly, filled with i.i.d. standard normals.
    ColumnMask { m1: usize, m2: usize },
    /// All entries i.i.d. standard normal.
    GaussianFull { m1: usize, m2: usize },
    /// All entries i.i.d. uniform on `{−1, +1}`.
    RademacherFull { m1: usize, m2: usize },
    /// Non-random `X_1..X_n`; the `L2(Π)` norm is the empirical one.
    Fixed {
        m1: usize,
        m2: usize,
        matrices: Vec<DenseMatrix<T>>,
        mu: Option<T>,
    },
}

impl<T: Real> Design<T> {
    pub fn usr(m1: usize, m2: usize) -> Self {
        Design::UsrCompletion { m1, m2 }
    }

    pub fn fixed(matrices: Vec<DenseMatrix<T>>) -> Result<Self> {
        let first = matrices
            .first()
            .ok_or_else(|| Error::invalid("fixed design needs at least one matrix"))?;
        let (m1, m2) = first.shape();
        for x in &matrices {
            first.check_same_shape(x)?;
        }
        Ok(Design::Fixed {
            m1,
            m2,
            matrices,
            mu: None,
        })
    }

    pub fn kind(&self) -> DesignKind {
        match self {
            Design::UsrCompletion { .. } => DesignKind::UsrCompletion,
            Design::ColumnMask { .. } => DesignKind::ColumnMask,
            Design::GaussianFull { .. } => DesignKind::GaussianFull,
            Design::RademacherFull { .. } => DesignKind::RademacherFull,
            Design::Fixed { .. } => DesignKind::Fixed,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        match *self {
            Design::UsrCompletion { m1, m2 }
            | Design::ColumnMask { m1, m2 }
            | Design::GaussianFull { m1, m2 }
            | Design::RademacherFull { m1, m2 }
            | Design::Fixed { m1, m2, .. } => (m1, m2),
        }
    }

    /// Isometry factor `μ` with `‖A‖²_{L2(Π)} = μ⁻²‖A‖₂²`.
    pub fn mu(&self) -> Option<T> {
        let (m1, m2) = self.dims();
        match self {
            Design::UsrCompletion { .. } => Some(T::from_usize_lossy(m1 * m2).sqrt()),
            Design::ColumnMask { .. } => Some(T::from_usize_lossy(m2).sqrt()),
            Design::GaussianFull { .. } | Design::RademacherFull { .. } => Some(T::one()),
            Design::Fixed { mu, .. } => *mu,
        }
    }

    /// `c` such that `‖A‖²_{L2(Π)} = c‖A‖₂²` for every `A`, when one exists.
    fn isotropic_scale(&self) -> Option<T> {
        let (m1, m2) = self.dims();
        match self {
            Design::UsrCompletion { .. } => Some(T::from_usize_lossy(m1 * m2).recip()),
            Design::ColumnMask { .. } => Some(T::from_usize_lossy(m2).recip()),
            Design::GaussianFull { .. } | Design::RademacherFull { .. } => Some(T::one()),
            Design::Fixed { .. } => None,
        }
    }

    fn check_shape(&self, a: &DenseMatrix<T>) -> Result<()> {
        if a.shape() != self.dims() {
            let (m1, m2) = self.dims();
            return Err(Error::Dimension(format!(
                "matrix is {}x{}, design is {m1}x{m2}",
                a.rows(),
                a.cols()
            )));
        }
        Ok(())
    }

    /// The self-adjoint operator `Q` with `⟨A, Q(A)⟩ = ‖A‖²_{L2(Π)}`,
    /// i.e. `Q(A) = (1/n) Σ_i E(⟨A, X_i⟩ X_i)`.
    pub fn gram_apply(&self, a: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
        self.check_shape(a)?;
        if let Some(c) = self.isotropic_scale() {
            return Ok(a.scaled(c));
        }
        let Design::Fixed { matrices, .. } = self else {
            unreachable!("only the fixed design is anisotropic")
        };
        let (m1, m2) = self.dims();
        let mut out = DenseMatrix::zeros(m1, m2);
        let inv_n = T::from_usize_lossy(matrices.len()).recip();
        for x in matrices {
            out.axpy(trace_inner(a, x)? * inv_n, x);
        }
        Ok(out)
    }

    /// Largest eigenvalue of [`Design::gram_apply`] viewed as a linear map.
    pub fn gram_top_eigenvalue(&self) -> Result<T> {
        if let Some(c) = self.isotropic_scale() {
            return Ok(c);
        }
        let Design::Fixed { matrices, .. } = self else {
            unreachable!()
        };
        // Nonzero spectrum of (1/n)ΣvecX vecXᵀ equals that of the n×n kernel ⟨X_i,X_j⟩/n.
        let n = matrices.len();
        let (m1, m2) = self.dims();
        let inv_n = T::from_usize_lossy(n).recip();
        let gram = if n <= m1 * m2 {
            let mut k = DenseMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..=i {
                    let v = trace_inner(&matrices[i], &matrices[j])? * inv_n;
                    k[(i, j)] = v;
                    k[(j, i)] = v;
                }
            }
            k
        } else {
            let d = m1 * m2;
            let mut g = DenseMatrix::zeros(d, d);
            for x in matrices {
                let v = x.as_slice();
                for i in 0..d {
                    if v[i] == T::zero() {
                        continue;
                    }
                    for j in 0..d {
                        g[(i, j)] += v[i] * v[j] * inv_n;
                    }
                }
            }
            g
        };
        Ok(svd(&gram)?.sigma[0])
    }

    /// Draws one design matrix.
    pub fn draw(&self, rng: &mut TrialRng, index: usize) -> DesignDraw<T> {
        let (m1, m2) = self.dims();
        match self {
            Design::UsrCompletion { .. } => DesignDraw::Entry {
                row: rng.random_range(0..m1),
                col: rng.random_range(0..m2),
            },
            Design::ColumnMask { .. } => {
                let col = rng.random_range(0..m2);
                let mut x = DenseMatrix::zeros(m1, m2);
                for i in 0..m1 {
                    x[(i, col)] = T::lit(rng.sample(StandardNormal));
                }
                DesignDraw::Matrix(x)
            }
            Design::GaussianFull { .. } => {
                DesignDraw::Matrix(DenseMatrix::from_fn(m1, m2, |_, _| T::lit(rng.sample(StandardNormal))))
            }
            Design::RademacherFull { .. } => DesignDraw::Matrix(DenseMatrix::from_fn(m1, m2, |_, _| {
                if rng.random::<bool>() {
                    T::one()
                } else {
                    -T::one()
                }
            })),
            Design::Fixed { matrices, .. } => DesignDraw::Matrix(matrices[index].clone()),
        }
    }
}

/// A single realised design matrix.
#[derive(Clone, Debug, PartialEq)]
pub enum DesignDraw<T> {
    Entry { row: usize, col: usize },
    Matrix(DenseMatrix<T>),
}

/// Noise law for `ξ_i`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel<T> {
    None,
    /// `ξ ~ N(0, σ²)`.
    Gaussian {
        sigma: T,
    },
    /// `ξ = σ·sign(g)·|g|^{2/α}`, `g ~ N(0,1)`; `α = 2` is Gaussian.
    SubExp {
        sigma: T,
        alpha: T,
    },
    /// `Y = ±η` with `P(Y = η | X) = 1/2 + ⟨A0, X⟩/(2η)`.
    BoundedSign {
        eta: T,
    },
}

impl<T: Real> NoiseModel<T> {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseModel::None => Ok(()),
            NoiseModel::Gaussian { sigma } if sigma > T::zero() && sigma.is_finite() => Ok(()),
            NoiseModel::SubExp { sigma, alpha }
                if sigma > T::zero() && sigma.is_finite() && alpha >= T::one() && alpha.is_finite() =>
            {
                Ok(())
            }
            NoiseModel::BoundedSign { eta } if eta > T::zero() && eta.is_finite() => Ok(()),
            other => Err(Error::invalid(format!("bad noise parameters: {other:?}"))),
        }
    }

    /// Additive noise for one draw. Not meaningful for `BoundedSign`.
    fn additive(&self, rng: &mut TrialRng) -> T {
        match *self {
            NoiseModel::None | NoiseModel::BoundedSign { .. } => T::zero(),
            NoiseModel::Gaussian { sigma } => sigma * T::lit(rng.sample(StandardNormal)),
            NoiseModel::SubExp { sigma, alpha } => {
                let g: f64 = rng.sample(StandardNormal);
                let mag = T::lit(g.abs()).powf(T::lit(2.0) / alpha);
                sigma * mag * T::lit(g.signum())
            }
        }
    }

    /// `E ξ²` for the additive models.
    pub fn variance(&self) -> Option<T> {
        match *self {
            NoiseModel::None => Some(T::zero()),
            NoiseModel::Gaussian { sigma } => Some(sigma * sigma),
            NoiseModel::SubExp { sigma, alpha } => {
                Some(sigma * sigma * T::lit(abs_normal_moment(4.0 / alpha.to_f64_lossy())))
            }
            NoiseModel::BoundedSign { .. } => None,
        }
    }
}

/// `E|g|^q` for standard normal `g`.
pub fn abs_normal_moment(q: f64) -> f64 {
    2f64.powf(q / 2.0) * statrs::function::gamma::gamma((q + 1.0) / 2.0) / std::f64::consts::PI.sqrt()
}

/// Constants of the moment condition `E exp(|ξ|^α/s^α) < c̃`, `E ξ² ≥ c1 s²`
/// realised by the sub-exponential generator with nominal scale `σ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SubExpConstants {
    /// `s / σ = 4^{1/α}`, so that `|ξ|^α/s^α = g²/4`.
    pub scale_factor: f64,
    /// `E exp(g²/4) = √2`.
    pub c_tilde: f64,
    /// `E|g|^{4/α} / 16^{1/α}`.
    pub c1: f64,
}

pub fn subexp_constants(alpha: f64) -> SubExpConstants {
    SubExpConstants {
        scale_factor: 4f64.powf(1.0 / alpha),
        c_tilde: std::f64::consts::SQRT_2,
        c1: abs_normal_moment(4.0 / alpha) / 16f64.powf(1.0 / alpha),
    }
}

/// One completion-design observation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Entry<T> {
    pub row: usize,
    pub col: usize,
    pub y: T,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Samples<T> {
    Entries(Vec<Entry<T>>),
    Matrices(Vec<(DenseMatrix<T>, T)>),
}

/// The sample `{(X_i, Y_i)}` together with the design that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservationSet<T> {
    pub design: Design<T>,
    pub samples: Samples<T>,
}

impl<T: Real> ObservationSet<T> {
    pub fn new(design: Design<T>, samples: Samples<T>) -> Result<Self> {
        let obs = ObservationSet { design, samples };
        obs.validate()?;
        Ok(obs)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n() == 0 {
            return Err(Error::invalid("observation set must contain at least one record"));
        }
        let (m1, m2) = self.dims();
        match (&self.design, &self.samples) {
            (Design::UsrCompletion { .. }, Samples::Entries(es)) => {
                for e in es {
                    if e.row >= m1 || e.col >= m2 {
                        return Err(Error::invalid(format!(
                            "index ({}, {}) out of range for {m1}x{m2}",
                            e.row, e.col
                        )));
                    }
                    if !e.y.is_finite() {
                        return Err(Error::NonFinite("response"));
                    }
                }
            }
            (Design::UsrCompletion { .. }, _) | (_, Samples::Entries(_)) => {
                return Err(Error::InvalidDesign(
                    "entry samples go with the completion design only".into(),
                ))
            }
            (_, Samples::Matrices(ms)) => {
                for (x, y) in ms {
                    if x.shape() != (m1, m2) {
                        return Err(Error::Dimension("design matrix shape".into()));
                    }
                    if !y.is_finite() {
                        return Err(Error::NonFinite("response"));
                    }
                }
                if let Design::Fixed { matrices, .. } = &self.design {
                    if matrices.len() != ms.len() {
                        return Err(Error::invalid("fixed design size differs from sample size"));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        match &self.samples {
            Samples::Entries(e) => e.len(),
            Samples::Matrices(m) => m.len(),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.design.dims()
    }

    pub fn is_completion(&self) -> bool {
        matches!(self.design, Design::UsrCompletion { .. })
    }

    pub fn entries(&self) -> Option<&[Entry<T>]> {
        match &self.samples {
            Samples::Entries(e) => Some(e),
            Samples::Matrices(_) => None,
        }
    }

    /// `(1/n) Σ_i Y_i X_i`.
    pub fn mean_response_design(&self) -> DenseMatrix<T> {
        let (m1, m2) = self.dims();
        let mut out = DenseMatrix::zeros(m1, m2);
        let inv_n = T::from_usize_lossy(self.n()).recip();
        match &self.samples {
            Samples::Entries(es) => {
                for e in es {
                    out[(e.row, e.col)] += e.y;
                }
                out = out.scaled(inv_n);
            }
            Samples::Matrices(ms) => {
                for (x, y) in ms {
                    out.axpy(*y * inv_n, x);
                }
            }
        }
        out
    }

    /// Responses `Y_1..Y_n` in order.
    pub fn responses(&self) -> Vec<T> {
        match &self.samples {
            Samples::Entries(es) => es.iter().map(|e| e.y).collect(),
            Samples::Matrices(ms) => ms.iter().map(|(_, y)| *y).collect(),
        }
    }
}

/// Random `A0` with rank exactly `r` and `max |a0(i,j)| = a`.
///
/// `A0 = U Vᵀ` with factor entries uniform on `[−1, 1]`, rescaled to the entry
/// bound. Draws that come out rank-deficient (probability zero) are redrawn.
pub fn generate_ground_truth<T: Real>(m1: usize, m2: usize, r: usize, a: T, seed: u64) -> Result<DenseMatrix<T>> {
    if m1 == 0 || m2 == 0 || r == 0 || r > m1.min(m2) {
        return Err(Error::invalid(format!(
            "rank {r} must lie in 1..={} for a {m1}x{m2} matrix",
            m1.min(m2)
        )));
    }
    if !(a > T::zero()) || !a.is_finite() {
        return Err(Error::invalid("entry bound a must be positive"));
    }
    let mut rng = rng_from_seed(seed);
    for _ in 0..16 {
        let u = DenseMatrix::from_fn(m1, r, |_, _| T::lit(rng.random_range(-1.0..1.0)));
        let v = DenseMatrix::from_fn(m2, r, |_, _| T::lit(rng.random_range(-1.0..1.0)));
        let prod = u.matmul(&v.transpose())?;
        let peak = prod.max_abs();
        if peak == T::zero() {
            continue;
        }
        let a0 = prod.scaled(a / peak);
        if svd(&a0)?.numerical_rank() == r {
            return Ok(a0);
        }
    }
    Err(Error::invalid("could not draw a full-rank factorisation"))
}

/// Draws `n` i.i.d. observations `Y_i = ⟨X_i, A0⟩ + ξ_i`.
pub fn sample_observations<T: Real>(
    a0: &DenseMatrix<T>,
    design: &Design<T>,
    noise: &NoiseModel<T>,
    n: usize,
    seed: u64,
) -> Result<ObservationSet<T>> {
    let mut rng = rng_from_seed(seed);
    sample_observations_with(a0, design, noise, n, &mut rng)
}

/// [`sample_observations`] drawing from a caller-supplied stream.
pub fn sample_observations_with<T: Real>(
    a0: &DenseMatrix<T>,
    design: &Design<T>,
    noise: &NoiseModel<T>,
    n: usize,
    rng: &mut TrialRng,
) -> Result<ObservationSet<T>> {
    design.check_shape(a0)?;
    noise.validate()?;
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    if let Design::Fixed { matrices, .. } = design {
        if matrices.len() != n {
            return Err(Error::invalid(format!(
                "fixed design has {} matrices but n = {n}",
                matrices.len()
            )));
        }
    }
    if let NoiseModel::BoundedSign { eta } = *noise {
        if matches!(design, Design::UsrCompletion { .. }) && a0.max_abs() > eta {
            return Err(Error::invalid(format!("bounded responses need max|a0| <= eta = {eta}")));
        }
    }
    let respond = |mean: T, rng: &mut TrialRng| -> Result<T> {
        match *noise {
            NoiseModel::BoundedSign { eta } => {
                if mean.abs() > eta {
                    return Err(Error::invalid(format!("|<A0, X>| = {mean} exceeds eta = {eta}")));
                }
                let p = T::lit(0.5) + mean / (T::lit(2.0) * eta);
                let u: f64 = rng.random();
                Ok(if T::lit(u) < p { eta } else { -eta })
            }
            _ => Ok(mean + noise.additive(rng)),
        }
    };
    let samples = if let Design::UsrCompletion { .. } = design {
        let mut es = Vec::with_capacity(n);
        for i in 0..n {
            let DesignDraw::Entry { row, col } = design.draw(rng, i) else {
                unreachable!()
            };
            let y = respond(a0[(row, col)], rng)?;
            es.push(Entry { row, col, y });
        }
        Samples::Entries(es)
    } else {
        let mut ms = Vec::with_capacity(n);
        for i in 0..n {
            let DesignDraw::Matrix(x) = design.draw(rng, i) else {
                unreachable!()
            };
            let y = respond(trace_inner(a0, &x)?, rng)?;
            ms.push((x, y));
        }
        Samples::Matrices(ms)
    };
    ObservationSet::new(design.clone(), samples)
}

/// Exact `‖A‖²_{L2(Π)}`.
pub fn l2_pi_norm_sq<T: Real>(a: &DenseMatrix<T>, design: &Design<T>) -> Result<T> {
    let q = design.gram_apply(a)?;
    trace_inner(a, &q)
}

/// Population prediction risk `R(A) = ‖A − A0‖²_{L2(Π)} + noise_var` under the model.
pub fn prediction_risk<T: Real>(
    a: &DenseMatrix<T>,
    a0: &DenseMatrix<T>,
    design: &Design<T>,
    noise_var: T,
) -> Result<T> {
    if !(noise_var >= T::zero()) {
        return Err(Error::invalid("noise variance must be nonnegative"));
    }
    Ok(l2_pi_norm_sq(&a.sub(a0)?, design)? + noise_var)
}
