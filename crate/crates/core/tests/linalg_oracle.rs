use amem_core::linalg::{full_eigenvalues, spectral_radius, Mat};
use proptest::prelude::*;

fn oracle(m: &Mat) -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::from_row_slice(m.rows(), m.cols(), m.data())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn radius_matches_full_eigendecomposition(data in prop::collection::vec(-1.0f64..1.0, 64)) {
        let m = Mat::from_vec(8, 8, data).unwrap();
        let want = oracle(&m).complex_eigenvalues().iter().map(|c| c.norm()).fold(0.0, f64::max);
        let r = spectral_radius(&m, 1e-8, 5000).unwrap();
        prop_assert!((r.radius - want).abs() <= 1e-8 * want.max(1.0), "{} vs {} ({:?})", r.radius, want, r.method);
        prop_assert!(r.radius <= m.max_row_sum() * (1.0 + 1e-7));
    }

    #[test]
    fn eigenvalue_product_is_determinant(data in prop::collection::vec(-1.0f64..1.0, 36)) {
        let m = Mat::from_vec(6, 6, data).unwrap();
        let eigs = full_eigenvalues(&m).unwrap();
        prop_assert_eq!(eigs.len(), 6);
        let prod = eigs.iter().copied().reduce(|a, b| a * b).unwrap();
        let det = oracle(&m).determinant();
        prop_assert!((prod.re - det).abs() < 1e-8 && prod.im.abs() < 1e-8, "{} vs {}", prod, det);
    }

    #[test]
    fn matmul_is_associative(
        a in prop::collection::vec(-1.0f64..1.0, 12),
        b in prop::collection::vec(-1.0f64..1.0, 20),
        c in prop::collection::vec(-1.0f64..1.0, 10),
    ) {
        let (a, b, c) = (
            Mat::from_vec(3, 4, a).unwrap(),
            Mat::from_vec(4, 5, b).unwrap(),
            Mat::from_vec(5, 2, c).unwrap(),
        );
        let l = a.matmul(&b).unwrap().matmul(&c).unwrap();
        let r = a.matmul(&b.matmul(&c).unwrap()).unwrap();
        for (x, y) in l.data().iter().zip(r.data()) {
            prop_assert!((x - y).abs() <= 1e-10 * x.abs().max(y.abs()).max(1.0));
        }
    }
}
