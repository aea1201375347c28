mod common;

use common::*;
use proptest::prelude::*;
use shuffle_core::linalg::{diff_frobenius, gaussian_matrix, inner};
use shuffle_core::system::nnz_formula;
use shuffle_core::{AffineSystem, ComplexMatrix, C64};

#[test]
fn storage_example_counts() {
    // K=5, N=10, mu=6 uniform: |T_k| = 5*6, |R_k| = 10-6, S = Σ_k |R_k| (T - |T_k|).
    let inst = uniform_instance(5, 10, 6, 1, 1, 3);
    let idx = inst.index_sets();
    for k in 0..5 {
        assert_eq!(idx.available[k].len(), 30);
        assert_eq!(idx.requested[k].len(), 4);
    }
    let sys = assemble(&inst);
    assert_eq!(sys.equations(), 5 * 4 * (50 - 30));
    // Each of the 20 foreign messages of user k is held by 3 users: 5 * 4 * 20 * 3.
    assert_eq!(nnz_formula(&inst, &idx), 1200);
    assert_eq!(sys.nnz(), 1200);
}

#[test]
fn projection_matches_dense_pseudo_inverse_on_sparse_systems() {
    for seed in 0..40 {
        let mut r = rng(seed);
        let sys = random_sparse_system(2 + (seed as usize % 9), 3 + (seed as usize % 13), 5 + seed as usize % 30, seed);
        let m = gaussian_matrix(sys.rows(), sys.cols(), &mut r);
        let x = sys.project_affine(&m).unwrap();
        assert!(diff_frobenius(&x, &dense_projection(&sys, &m)) < 1e-8, "seed {seed}");
    }
}

#[test]
fn projection_matches_dense_pseudo_inverse_on_instances() {
    for seed in 0..20 {
        let inst = random_instance(3, 3, 1 + seed as usize % 3, 1 + seed as usize % 2, 1, seed);
        let sys = assemble(&inst);
        let m = gaussian_matrix(sys.rows(), sys.cols(), &mut rng(seed + 100));
        let x = sys.project_affine(&m).unwrap();
        assert!(diff_frobenius(&x, &dense_projection(&sys, &m)) < 1e-8, "seed {seed}");
    }
}

#[test]
fn inconsistent_rank_deficient_system_is_reported() {
    let one = C64::new(1.0, 0.0);
    let eqs = vec![vec![(0, 0, one)], vec![(0, 0, one * 2.0)]];
    let sys = AffineSystem::from_equations(1, 1, &eqs, &[one, one]).unwrap();
    assert!(sys.least_norm_solution().is_err());
    let ok = AffineSystem::from_equations(1, 1, &eqs, &[one, one * 2.0]).unwrap();
    assert!((ok.least_norm_solution().unwrap()[(0, 0)] - one).norm() < 1e-12);
}

fn instance_params() -> impl Strategy<Value = (usize, usize, usize, usize, usize, u64)> {
    (2usize..=4, 1usize..=4, 1usize..=2, 1usize..=2, any::<u64>()).prop_flat_map(|(k, n, l, d, seed)| {
        let min_mu = n.div_ceil(k);
        (Just(k), Just(n), min_mu..=n, Just(l), Just(d), Just(seed))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn triplet_count_equals_formula((k, n, mu, l, d, seed) in instance_params()) {
        let inst = random_instance(k, n, mu, l, d, seed);
        let idx = inst.index_sets();
        let sys = assemble(&inst);
        prop_assert_eq!(sys.nnz(), nnz_formula(&inst, &idx));
        let expected_s: usize = (0..k)
            .map(|u| idx.requested[u].len() * (idx.messages - idx.available[u].len()))
            .sum::<usize>() * d * d;
        prop_assert_eq!(sys.equations(), expected_s);
    }

    #[test]
    fn rhs_is_one_exactly_on_desired_diagonal_equations((k, n, mu, l, d, seed) in instance_params()) {
        let inst = random_instance(k, n, mu, l, d, seed);
        let sys = assemble(&inst);
        let ones = sys.rhs().iter().filter(|b| **b == C64::new(1.0, 0.0)).count();
        let zeros = sys.rhs().iter().filter(|b| **b == C64::new(0.0, 0.0)).count();
        let rx_pairs = sys.layout().unwrap().rx_pairs.len();
        prop_assert_eq!(ones, rx_pairs * d);
        prop_assert_eq!(ones + zeros, sys.equations());
    }

    #[test]
    fn adjoint_pairing((k, n, mu, l, d, seed) in instance_params()) {
        let inst = random_instance(k, n, mu, l, d, seed);
        let sys = assemble(&inst);
        prop_assume!(!sys.is_degenerate());
        let mut r = rng(seed);
        let x = gaussian_matrix(sys.rows(), sys.cols(), &mut r);
        let y = gaussian_matrix(sys.equations(), 1, &mut r);
        let ax = sys.apply(&x).unwrap();
        let lhs: C64 = ax.iter().zip(y.iter()).map(|(a, b)| a.conj() * b).sum();
        let rhs = inner(&x, &sys.adjoint(y.as_slice()).unwrap());
        prop_assert!((lhs - rhs).norm() <= 1e-10 * (1.0 + lhs.norm()));
    }

    #[test]
    fn projection_is_idempotent_and_orthogonal((k, n, mu, l, d, seed) in instance_params()) {
        let inst = random_instance(k, n, mu, l, d, seed);
        let sys = assemble(&inst);
        prop_assume!(!sys.is_degenerate());
        let mut r = rng(seed ^ 1);
        let m = gaussian_matrix(sys.rows(), sys.cols(), &mut r);
        let x = sys.project_affine(&m).unwrap();
        prop_assert!(sys.residual(&x).unwrap() <= 1e-10);
        prop_assert!(diff_frobenius(&sys.project_affine(&x).unwrap(), &x) <= 1e-9);
        // M - P(M) is orthogonal to every direction inside the affine set.
        let y = sys.project_affine(&gaussian_matrix(sys.rows(), sys.cols(), &mut r)).unwrap();
        let gap: ComplexMatrix = &m - &x;
        prop_assert!(inner(&gap, &(&y - &x)).norm() <= 1e-9 * (1.0 + diff_frobenius(&y, &x) * diff_frobenius(&m, &x)));
    }
}
