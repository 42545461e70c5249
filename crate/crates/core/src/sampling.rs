//! Seeded sampling cut into fixed-size blocks. Each block draws from its own
//! ChaCha stream, so results do not depend on how many threads run them.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub const BLOCK: usize = 64;

/// Generator for block `block` of stream `stream`.
pub fn block_rng(seed: u64, stream: u64, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((stream << 40) ^ block);
    rng
}

/// `f(rng, i)` for `i in 0..count`, in index order.
pub fn sample_map<T, F>(seed: u64, stream: u64, count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng, usize) -> T + Sync,
{
    let blocks = count.div_ceil(BLOCK);
    let chunks: Vec<Vec<T>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = block_rng(seed, stream, b as u64);
            let end = ((b + 1) * BLOCK).min(count);
            (b * BLOCK..end).map(|i| f(&mut rng, i)).collect()
        })
        .collect();
    chunks.into_iter().flatten().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn independent_of_thread_count() {
        let draw = || sample_map(7, 3, 300, |rng, i| (i, rng.random::<u64>()));
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(draw);
        let many = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap().install(draw);
        assert_eq!(one, many);
        assert!(one.iter().enumerate().all(|(i, (j, _))| i == *j));
    }

    #[test]
    fn streams_differ() {
        let a = sample_map(7, 1, 10, |rng, _| rng.random::<u64>());
        let b = sample_map(7, 2, 10, |rng, _| rng.random::<u64>());
        assert_ne!(a, b);
    }
}
