//! Deterministic RNG plumbing. All randomness in the crate flows through
//! `ChaCha8Rng` seeded from 64-bit values, with independent streams derived
//! via SplitMix64 so that parallel work never shares generator state. Normal
//! draws use `rand_distr`'s ziggurat sampler.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Independent sub-seed for stream `stream` of a base seed.
pub(crate) fn derive(seed: u64, stream: u64) -> u64 {
    splitmix64(seed ^ splitmix64(stream.wrapping_add(0xA076_1D64_78BD_642F)))
}

pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub(crate) fn shuffle<T>(items: &mut [T], seed: u64) {
    items.shuffle(&mut rng(seed));
}

/// `k` distinct indices from `0..n`, by partial Fisher-Yates.
pub(crate) fn sample_without_replacement(
    n: usize,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<usize> {
    debug_assert!(k <= n);
    let mut pool: Vec<usize> = (0..n).collect();
    let (sampled, _) = pool.partial_shuffle(rng, k);
    sampled.to_vec()
}
