//! Oracles and generators shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shuffle_core::instance::{random_placement, uniform_placement};
use shuffle_core::linalg::gaussian_matrix;
use shuffle_core::{AffineSystem, ChannelMode, ComplexMatrix, ComplexVector, ProblemInstance, C64};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn two_user(seed: u64) -> ProblemInstance {
    ProblemInstance::generate(2, 2, 1, 1, 1, 1, vec![vec![0], vec![1]], ChannelMode::Direct, seed).unwrap()
}

/// Instance with a random covering placement.
pub fn random_instance(k: usize, n: usize, mu: usize, l: usize, d: usize, seed: u64) -> ProblemInstance {
    let placement = random_placement(k, n, mu, seed).unwrap();
    ProblemInstance::generate(k, n, mu, l, l, d, placement, ChannelMode::Direct, seed ^ 0x5EED).unwrap()
}

pub fn uniform_instance(k: usize, n: usize, mu: usize, l: usize, d: usize, seed: u64) -> ProblemInstance {
    let placement = uniform_placement(k, n, mu, seed).unwrap();
    ProblemInstance::generate(k, n, mu, l, l, d, placement, ChannelMode::Direct, seed ^ 0x5EED).unwrap()
}

pub fn assemble(inst: &ProblemInstance) -> AffineSystem {
    AffineSystem::assemble(inst, &inst.index_sets()).unwrap()
}

/// Consistent sparse system: each equation touches 1 to 4 random positions and
/// `b = A(X0)` for a Gaussian `X0`, so rank-deficient operators stay feasible.
pub fn random_sparse_system(rows: usize, cols: usize, s: usize, seed: u64) -> AffineSystem {
    let mut r = rng(seed);
    let eqs: Vec<Vec<(usize, usize, C64)>> = (0..s)
        .map(|_| {
            let terms = r.random_range(1..=4);
            (0..terms)
                .map(|_| {
                    let g = gaussian_matrix(1, 1, &mut r)[(0, 0)];
                    (r.random_range(0..rows), r.random_range(0..cols), g)
                })
                .collect()
        })
        .collect();
    let x0 = gaussian_matrix(rows, cols, &mut r);
    let probe = AffineSystem::from_equations(rows, cols, &eqs, &vec![C64::new(0.0, 0.0); s]).unwrap();
    let b: Vec<C64> = probe.apply(&x0).unwrap().iter().copied().collect();
    AffineSystem::from_equations(rows, cols, &eqs, &b).unwrap()
}

/// `rows x cols` system of `s` dense Gaussian equations whose right-hand side comes
/// from a planted matrix of the given rank.
pub fn planted_system(rows: usize, cols: usize, s: usize, rank: usize, seed: u64) -> (AffineSystem, ComplexMatrix) {
    let mut r = rng(seed);
    let planted = gaussian_matrix(rows, rank, &mut r) * gaussian_matrix(rank, cols, &mut r);
    let eqs: Vec<Vec<(usize, usize, C64)>> = (0..s)
        .map(|_| {
            let g = gaussian_matrix(rows, cols, &mut r);
            (0..rows)
                .flat_map(|i| (0..cols).map(move |j| (i, j)))
                .map(|(i, j)| (i, j, g[(i, j)]))
                .collect()
        })
        .collect();
    let zero = vec![C64::new(0.0, 0.0); s];
    let b: Vec<C64> = AffineSystem::from_equations(rows, cols, &eqs, &zero)
        .unwrap()
        .apply(&planted)
        .unwrap()
        .iter()
        .copied()
        .collect();
    (AffineSystem::from_equations(rows, cols, &eqs, &b).unwrap(), planted)
}

pub fn row_major(m: &ComplexMatrix) -> ComplexVector {
    ComplexVector::from_iterator(m.len(), m.transpose().iter().copied())
}

pub fn from_row_major(v: &ComplexVector, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_row_slice(rows, cols, v.as_slice())
}

/// `M - A^+(A(M) - b)` through a dense pseudo-inverse of the operator.
pub fn dense_projection(sys: &AffineSystem, m: &ComplexMatrix) -> ComplexMatrix {
    if sys.is_degenerate() {
        return m.clone();
    }
    let a = sys.to_dense();
    let b = ComplexVector::from_column_slice(sys.rhs());
    let v = row_major(m);
    let r = &a * &v - b;
    let smax = a.singular_values().max();
    let pinv = a.pseudo_inverse(1e-10 * smax.max(1.0)).unwrap();
    from_row_major(&(v - pinv * r), sys.rows(), sys.cols())
}
