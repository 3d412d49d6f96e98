mod common;

use common::*;
use nalgebra::DMatrix;
use proptest::prelude::*;
use relspec_core::operator::{
    default_merge_tol, eigendecompose, inertia, matrix_function, max_abs_diff, sign_split, spectral_gaps,
};
use relspec_core::{SymmetricOperator, ZeroPolicy};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn reconstruction_up_to_200(seed in any::<u64>(), n in 1usize..=200) {
        let h = random_symmetric(&mut rng(seed), n);
        let eig = eigendecompose(&h).unwrap();
        let norm = h.norm_max();
        prop_assert!(max_abs_diff(&eig.weighted(&eig.values), h.matrix()) <= 1e-10 * norm);
        let gram = eig.vectors.transpose() * &eig.vectors;
        prop_assert!(max_abs_diff(&gram, &DMatrix::identity(n, n)) <= 1e-12 * n as f64);
        prop_assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
        let reference = reference_eigenvalues(h.matrix());
        for (x, y) in eig.values.iter().zip(&reference) {
            prop_assert!((x - y).abs() <= 1e-10 * norm);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn functional_calculus_composes(seed in any::<u64>(), n in 1usize..=30, s in -3.0..3.0f64, t in -2.0..2.0f64) {
        let h = random_symmetric(&mut rng(seed), n);
        let affine = move |x: f64| s * x + t;
        // abs after affine
        let lhs = matrix_function(&h, |x| affine(x).abs()).unwrap();
        let rhs = matrix_function(&matrix_function(&h, affine).unwrap(), f64::abs).unwrap();
        prop_assert!(lhs.max_diff(&rhs) <= 1e-9 * lhs.norm_max().max(1.0));
        // sqrt after abs (positives)
        let lhs = matrix_function(&h, |x| x.abs().sqrt()).unwrap();
        let rhs = matrix_function(&matrix_function(&h, f64::abs).unwrap(), |x| x.max(0.0).sqrt()).unwrap();
        prop_assert!(lhs.max_diff(&rhs) <= 1e-9 * lhs.norm_max().max(1.0));
        // affine after sqrt of a positive operator
        let pos = matrix_function(&h, |x| x.abs() + 1.0).unwrap();
        let lhs = matrix_function(&pos, |x| affine(x.sqrt())).unwrap();
        let rhs = matrix_function(&matrix_function(&pos, f64::sqrt).unwrap(), affine).unwrap();
        prop_assert!(lhs.max_diff(&rhs) <= 1e-9 * lhs.norm_max().max(1.0));
    }

    #[test]
    fn absolute_value_is_sign_times_h(seed in any::<u64>(), n in 1usize..=40, plus in any::<bool>()) {
        let h = random_symmetric(&mut rng(seed), n);
        let policy = if plus { ZeroPolicy::Plus } else { ZeroPolicy::Minus };
        let split = sign_split(&h, policy).unwrap();
        let abs = matrix_function(&h, f64::abs).unwrap();
        let tol = 1e-10 * h.norm_max();
        prop_assert!(max_abs_diff(abs.matrix(), &(split.j.matrix() * h.matrix())) <= tol);
        prop_assert!(max_abs_diff(abs.matrix(), &(h.matrix() * split.j.matrix())) <= tol);
        let sum = split.p_plus.add(&split.p_minus);
        prop_assert!(sum.max_diff(&SymmetricOperator::identity(n)) <= 1e-12 * n as f64);
    }

    #[test]
    fn gaps_partition_the_line(seed in any::<u64>(), n in 1usize..=20, points in prop::collection::vec(-12.0..12.0f64, 50)) {
        let mut r = rng(seed);
        // spectrum with deliberate near-duplicates
        let mut values: Vec<f64> = (0..n).map(|_| uniform(&mut r, -8.0, 8.0)).collect();
        if n > 1 {
            values[1] = values[0] + 1e-15;
        }
        let h = with_spectrum(&mut r, &values);
        let tol = default_merge_tol(&h);
        let gaps = spectral_gaps(&h, tol).unwrap();
        let eig = eigendecompose(&h).unwrap();
        let slack = 1e-9 * h.norm_max();
        for x in points.iter().copied().chain(eig.values.iter().copied()) {
            let in_gap = gaps.iter().any(|g| g.contains(x));
            let on_cluster = eig.values.iter().any(|&l| (l - x).abs() <= tol + slack)
                || gaps.windows(2).any(|w| w[0].upper - slack <= x && x <= w[1].lower + slack);
            prop_assert!(in_gap || on_cluster, "point {x} uncovered");
        }
        prop_assert!(gaps.first().unwrap().lower == f64::NEG_INFINITY);
        prop_assert!(gaps.last().unwrap().upper == f64::INFINITY);
    }

    #[test]
    fn congruence_preserves_inertia(seed in any::<u64>(), n in 1usize..=25) {
        let mut r = rng(seed);
        let values: Vec<f64> = (0..n).map(|i| if i % 3 == 0 { 0.0 } else { uniform(&mut r, -5.0, 5.0) }).collect();
        let h = with_spectrum(&mut r, &values);
        let x = random_orthogonal(&mut r, n) * DMatrix::from_diagonal(&gaussian_vector(&mut r, n).map(|v| 0.5 + v.abs()));
        let moved = h.congruence(&x);
        let before = inertia(&h, 1e-9).unwrap();
        let after = inertia(&moved, 1e-9 * moved.norm_max().max(1.0)).unwrap();
        prop_assert_eq!(before, after);
    }
}
