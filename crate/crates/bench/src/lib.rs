//! Fixed problem instances for the kernel benchmarks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use shuffle_core::instance::{random_placement, uniform_placement};
use shuffle_core::linalg::gaussian_matrix;
use shuffle_core::{AffineSystem, ChannelMode, ComplexMatrix, ProblemInstance};

/// Storage-sweep instance: K=5, N=10, single antenna, random placement.
pub fn storage_instance(mu: usize, seed: u64) -> ProblemInstance {
    let placement = random_placement(5, 10, mu, seed).expect("valid storage point");
    ProblemInstance::generate(5, 10, mu, 1, 1, 1, placement, ChannelMode::Direct, seed).expect("valid instance")
}

/// Antenna-sweep instance: K=8, N=4, mu=1, L=M antennas.
pub fn antenna_instance(l: usize, seed: u64) -> ProblemInstance {
    let placement = random_placement(8, 4, 1, seed).expect("valid antenna point");
    ProblemInstance::generate(8, 4, 1, l, l, 1, placement, ChannelMode::Direct, seed).expect("valid instance")
}

/// User-sweep instance: N=5, mu=2, uniform placement.
pub fn user_instance(k: usize, seed: u64) -> ProblemInstance {
    let placement = uniform_placement(k, 5, 2, seed).expect("valid user point");
    ProblemInstance::generate(k, 5, 2, 1, 1, 1, placement, ChannelMode::Direct, seed).expect("valid instance")
}

pub fn system(inst: &ProblemInstance) -> AffineSystem {
    AffineSystem::assemble(inst, &inst.index_sets()).expect("instances assemble")
}

/// A Gaussian matrix shaped like the unknown of `sys`.
pub fn random_point(sys: &AffineSystem, seed: u64) -> ComplexMatrix {
    gaussian_matrix(sys.rows(), sys.cols(), &mut ChaCha8Rng::seed_from_u64(seed))
}
