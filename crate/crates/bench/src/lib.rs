//! Fixtures shared by the benchmarks.

use lbi::{standardize_values, StandardizedSample};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// A reproducible standard normal sample of size `n`, standardized.
pub fn normal_sample(n: usize, seed: u64) -> StandardizedSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    standardize_values(&x).expect("normal draws are not degenerate")
}
