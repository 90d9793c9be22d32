//! Shared helpers for unit tests: seeded Gaussian matrices and realizable
//! targets X = max(0, WH).

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::core::{support_from, ObservedMatrix};

pub fn random_matrix(m: usize, n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(m, n, |_, _| StandardNormal.sample(&mut rng))
}

pub fn random_target(m: usize, n: usize, r: usize, seed: u64) -> ObservedMatrix {
    let w = random_matrix(m, r, seed);
    let h = random_matrix(r, n, seed.wrapping_add(1));
    support_from((w * h).map(|v| v.max(0.0))).unwrap()
}
