//! Keyed random substreams.
//!
//! Every stochastic decision in a run draws from a ChaCha stream whose seed is
//! derived from a tuple of integers (run seed, replicate, agent, round, ...).
//! Two calls with the same key always yield the same stream, independent of
//! thread scheduling or iteration order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds an ordered key into a single 64-bit seed.
pub fn derive_seed(parts: &[u64]) -> u64 {
    parts.iter().fold(GOLDEN, |acc, &p| {
        mix64(acc.wrapping_add(GOLDEN) ^ mix64(p.wrapping_add(GOLDEN)))
    })
}

pub fn substream(parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(parts))
}

/// Uniform draw in `[0, 1)` that is a pure function of the key.
pub fn unit_hash(parts: &[u64]) -> f64 {
    (derive_seed(parts) >> 11) as f64 / (1u64 << 53) as f64
}
