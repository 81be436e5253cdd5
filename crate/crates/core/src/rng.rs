//! Deterministic block substreams.
//!
//! Replications are grouped in blocks of [`BLOCK_SIZE`]. Block `b` draws
//! from ChaCha8 seeded with `seed` on stream `b`, so the output does not
//! depend on how blocks are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::Result;

pub const BLOCK_SIZE: usize = 1024;

/// Generator for block `block` of a run seeded with `seed`.
pub fn block_rng(seed: u64, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block);
    rng
}

/// Run `f(rng, count)` for every block covering `total` replications in
/// parallel and concatenate the outputs in block order.
pub fn map_blocks<T, F>(total: usize, seed: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng, usize) -> Result<Vec<T>> + Sync,
{
    let blocks = total.div_ceil(BLOCK_SIZE);
    let parts: Vec<Vec<T>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let count = BLOCK_SIZE.min(total - b * BLOCK_SIZE);
            let mut rng = block_rng(seed, b as u64);
            f(&mut rng, count)
        })
        .collect::<Result<_>>()?;
    Ok(parts.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn serial_and_parallel_agree() {
        let draw = |rng: &mut ChaCha8Rng, count: usize| Ok((0..count).map(|_| rng.random::<u64>()).collect());
        let parallel = map_blocks(5000, 42, draw).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let serial = pool.install(|| map_blocks(5000, 42, draw)).unwrap();
        assert_eq!(parallel, serial);
        assert_eq!(parallel.len(), 5000);
        let other = map_blocks(5000, 43, draw).unwrap();
        assert_ne!(parallel, other);
    }

    #[test]
    fn streams_differ_between_blocks() {
        let a: u64 = block_rng(1, 0).random();
        let b: u64 = block_rng(1, 1).random();
        assert_ne!(a, b);
    }
}
