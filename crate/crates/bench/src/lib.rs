//! Fixed workloads shared by the benchmarks.

use std::sync::Arc;

use mechkit::allocation::{AllocationSet, StandardKind};
use mechkit::convergence::MechanismSequence;
use mechkit::{random, DiscreteValuation, Scalar};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn set<S: Scalar>(kind: StandardKind, k: usize) -> Arc<AllocationSet<S>> {
    Arc::new(AllocationSet::standard(kind, k).expect("standard set"))
}

/// Uniform valuation on the grid `{1, ..., steps}^k`.
pub fn uniform_grid<S: Scalar>(k: usize, steps: i64) -> DiscreteValuation<S> {
    let axis: Vec<S> = (1..=steps).map(S::from_i64).collect();
    let axes = vec![axis; k];
    DiscreteValuation::uniform(mechkit::grid::product(&axes)).expect("distinct points")
}

/// `n` random types with random weights, fixed by `seed`.
pub fn random_valuation<S: Scalar>(seed: u64, k: usize, n: usize) -> DiscreteValuation<S> {
    random::valuation(&mut ChaCha8Rng::seed_from_u64(seed), k, n, 12)
}

/// A payment-monotone chain of `size` offers on the cube.
pub fn chain<S: Scalar>(seed: u64, k: usize, size: usize) -> MechanismSequence<S> {
    random::chain_sequence(&mut ChaCha8Rng::seed_from_u64(seed), &set(StandardKind::Cube, k), size)
        .expect("chain offers lie in the cube")
}
