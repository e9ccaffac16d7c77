use proptest::prelude::*;
use tracereg::linalg::{
    frobenius_norm, nuclear_norm, operator_norm, soft_threshold_svd, svd, trace_inner, DenseMatrix,
};

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = DenseMatrix<f64>> {
    prop::collection::vec(-5.0f64..5.0, rows * cols)
        .prop_map(move |v| DenseMatrix::from_row_major(rows, cols, v).unwrap())
}

fn shaped_pair() -> impl Strategy<Value = (DenseMatrix<f64>, DenseMatrix<f64>)> {
    (1usize..9, 1usize..9).prop_flat_map(|(r, c)| (matrix(r, c), matrix(r, c)))
}

/// Small-integer entries with repeated rows and columns: ties and exact rank deficiency.
fn structured() -> impl Strategy<Value = DenseMatrix<f64>> {
    (1usize..8, 1usize..8, 1usize..4).prop_flat_map(|(r, c, k)| {
        prop::collection::vec(-2i32..3, r.max(k) * c)
            .prop_map(move |v| DenseMatrix::from_fn(r, c, |i, j| f64::from(v[(i % k.min(r)) * c + j])))
    })
}

fn rank_one() -> impl Strategy<Value = DenseMatrix<f64>> {
    (1usize..8, 1usize..8).prop_flat_map(|(r, c)| {
        (
            prop::collection::vec(-3.0f64..3.0, r),
            prop::collection::vec(-3.0f64..3.0, c),
        )
            .prop_map(|(u, v)| DenseMatrix::outer(&u, &v))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn trace_duality((a, b) in shaped_pair()) {
        let lhs = trace_inner(&a, &b).unwrap().abs();
        let rhs = nuclear_norm(&a).unwrap() * operator_norm(&b).unwrap();
        prop_assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-12, "{lhs} > {rhs}");
    }

    #[test]
    fn norm_ordering((a, _) in shaped_pair()) {
        let n1 = nuclear_norm(&a).unwrap();
        let n2 = frobenius_norm(&a);
        let ninf = operator_norm(&a).unwrap();
        prop_assert!(n1 + 1e-10 >= n2 && n2 + 1e-10 >= ninf);
    }

    #[test]
    fn norms_coincide_on_rank_one(a in rank_one()) {
        let n1 = nuclear_norm(&a).unwrap();
        let n2 = frobenius_norm(&a);
        let ninf = operator_norm(&a).unwrap();
        let scale = 1.0 + n2;
        prop_assert!((n1 - n2).abs() <= 1e-10 * scale && (n2 - ninf).abs() <= 1e-10 * scale);
    }

    #[test]
    fn soft_threshold_nonexpansive((a, b) in shaped_pair(), t in 0.0f64..6.0) {
        let sa = soft_threshold_svd(&a, t).unwrap();
        let sb = soft_threshold_svd(&b, t).unwrap();
        let lhs = frobenius_norm(&sa.sub(&sb).unwrap());
        let rhs = frobenius_norm(&a.sub(&b).unwrap());
        prop_assert!(lhs <= rhs + 1e-10, "{lhs} > {rhs}");
    }

    #[test]
    fn weyl_perturbation((a, e) in shaped_pair(), eps in 0.0f64..1.0) {
        let e = e.scaled(eps);
        let before = svd(&a).unwrap().sigma;
        let after = svd(&a.add(&e).unwrap()).unwrap().sigma;
        let bound = operator_norm(&e).unwrap();
        for (x, y) in before.iter().zip(&after) {
            prop_assert!((x - y).abs() <= bound + 1e-10);
        }
    }

    #[test]
    fn svd_handles_structured_input(a in structured()) {
        let f = svd(&a).unwrap();
        let err = frobenius_norm(&f.reconstruct().sub(&a).unwrap());
        prop_assert!(err <= 1e-10 * (1.0 + frobenius_norm(&a)));
        let (m1, m2) = a.shape();
        let k = m1.min(m2);
        for p in 0..k {
            for q in 0..k {
                let target = if p == q { 1.0 } else { 0.0 };
                let uu: f64 = (0..m1).map(|i| f.u[(i, p)] * f.u[(i, q)]).sum();
                let vv: f64 = (0..m2).map(|j| f.v[(j, p)] * f.v[(j, q)]).sum();
                prop_assert!((uu - target).abs() < 1e-10 && (vv - target).abs() < 1e-10);
            }
        }
        for w in f.sigma.windows(2) {
            prop_assert!(w[0] >= w[1]);
        }
    }
}
