use super::{svd, DenseMatrix};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Schatten exponent `p ∈ (0, ∞]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Schatten<T> {
    Finite(T),
    Infinity,
}

impl<T: Real> Schatten<T> {
    /// `Infinity` for `p = +∞`, otherwise `Finite(p)`.
    pub fn new(p: T) -> Self {
        if p.is_infinite() && p > T::zero() {
            Schatten::Infinity
        } else {
            Schatten::Finite(p)
        }
    }
}

/// `(Σ_j σ_j^p)^{1/p}`, or `σ_1` for `p = ∞`. `p = 1` is the nuclear norm,
/// `p = 2` Frobenius. For `p < 1` this is only a quasi-norm.
pub fn schatten_norm<T: Real>(a: &DenseMatrix<T>, p: Schatten<T>) -> Result<T> {
    if let Schatten::Finite(p) = p {
        if !(p > T::zero()) || !p.is_finite() {
            return Err(Error::invalid(format!(
                "Schatten exponent must lie in (0, inf], got {p}"
            )));
        }
    }
    let sigma = svd(a)?.sigma;
    Ok(schatten_from_sigma(&sigma, p))
}

pub(crate) fn schatten_from_sigma<T: Real>(sigma: &[T], p: Schatten<T>) -> T {
    match p {
        Schatten::Infinity => sigma.first().copied().unwrap_or_else(T::zero),
        Schatten::Finite(p) if p == T::one() => sigma.iter().copied().sum(),
        Schatten::Finite(p) => sigma.iter().map(|s| s.powf(p)).sum::<T>().powf(p.recip()),
    }
}

pub fn nuclear_norm<T: Real>(a: &DenseMatrix<T>) -> Result<T> {
    schatten_norm(a, Schatten::Finite(T::one()))
}

/// Computed from the entries; no SVD.
pub fn frobenius_norm<T: Real>(a: &DenseMatrix<T>) -> T {
    a.frobenius_sq().sqrt()
}

pub fn operator_norm<T: Real>(a: &DenseMatrix<T>) -> Result<T> {
    schatten_norm(a, Schatten::Infinity)
}

/// `⟨A, B⟩ = tr(AᵀB) = Σ a(i,j) b(i,j)`.
pub fn trace_inner<T: Real>(a: &DenseMatrix<T>, b: &DenseMatrix<T>) -> Result<T> {
    a.check_same_shape(b)?;
    Ok(a.as_slice().iter().zip(b.as_slice()).map(|(&x, &y)| x * y).sum())
}

/// Proximal map of `threshold·‖·‖₁`: `Σ_j (σ_j − threshold)_+ u_j v_jᵀ`.
pub fn soft_threshold_svd<T: Real>(a: &DenseMatrix<T>, threshold: T) -> Result<DenseMatrix<T>> {
    if !(threshold >= T::zero()) {
        return Err(Error::invalid(format!(
            "threshold must be nonnegative, got {threshold}"
        )));
    }
    Ok(svd(a)?.soft_threshold(threshold).0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn schatten_examples() {
        let i2 = DenseMatrix::<f64>::identity(2);
        assert!((schatten_norm(&i2, Schatten::Finite(1.0)).unwrap() - 2.0).abs() < 1e-14);
        let d = DenseMatrix::<f64>::from_diag(2, 2, &[3.0, 4.0]);
        assert!((schatten_norm(&d, Schatten::Finite(2.0)).unwrap() - 5.0).abs() < 1e-14);
        assert_eq!(schatten_norm(&d, Schatten::Infinity).unwrap(), 4.0);
        assert_eq!(schatten_norm(&d, Schatten::new(f64::INFINITY)).unwrap(), 4.0);
    }

    #[test]
    fn schatten_rejects_nonpositive_exponent() {
        let d = DenseMatrix::<f64>::identity(2);
        for p in [0.0, -1.0, f64::NAN, f64::NEG_INFINITY] {
            assert!(matches!(
                schatten_norm(&d, Schatten::new(p)),
                Err(Error::InvalidParameter(_))
            ));
        }
    }

    #[test]
    fn trace_inner_examples() {
        let i2 = DenseMatrix::<f64>::identity(2);
        assert_eq!(trace_inner(&i2, &i2).unwrap(), 2.0);
        let a = DenseMatrix::from_rows(&[vec![1.0, 7.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(trace_inner(&a, &DenseMatrix::zeros(2, 2)).unwrap(), 0.0);
        assert_eq!(trace_inner(&DenseMatrix::basis(2, 2, 0, 1), &a).unwrap(), 7.0);
        assert!(matches!(
            trace_inner(&a, &DenseMatrix::zeros(2, 3)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn soft_threshold_examples() {
        let d = DenseMatrix::from_diag(2, 2, &[5.0, 1.0]);
        let s = soft_threshold_svd(&d, 2.0).unwrap();
        assert!(s.sub(&DenseMatrix::from_diag(2, 2, &[3.0, 0.0])).unwrap().max_abs() < 1e-14);
        assert!(soft_threshold_svd(&d, -1.0).is_err());
    }

    fn matrix_strategy(rows: usize, cols: usize) -> impl Strategy<Value = DenseMatrix<f64>> {
        prop::collection::vec(-3.0f64..3.0, rows * cols)
            .prop_map(move |v| DenseMatrix::from_row_major(rows, cols, v).unwrap())
    }

    proptest! {
        #[test]
        fn zero_threshold_is_identity(a in matrix_strategy(4, 6)) {
            let s = soft_threshold_svd(&a, 0.0).unwrap();
            prop_assert!(frobenius_norm(&s.sub(&a).unwrap()) <= 1e-10);
        }

        #[test]
        fn threshold_above_top_singular_value_clips_all(a in matrix_strategy(5, 3)) {
            let top = operator_norm(&a).unwrap();
            let s = soft_threshold_svd(&a, top).unwrap();
            prop_assert_eq!(s.max_abs(), 0.0);
        }

        #[test]
        fn thresholded_spectrum_is_shifted(a in matrix_strategy(3, 5), t in 0.0f64..4.0) {
            let before = svd(&a).unwrap().sigma;
            let after = svd(&soft_threshold_svd(&a, t).unwrap()).unwrap().sigma;
            for (b, x) in before.iter().zip(&after) {
                prop_assert!(((b - t).max(0.0) - x).abs() <= 1e-9);
            }
        }
    }
}
