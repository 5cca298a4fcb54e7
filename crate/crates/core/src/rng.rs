//! Seed splitting.
//!
//! Every stochastic unit of work (a repetition, a CV fold, a tree, a
//! simulated hour) draws from its own ChaCha8 stream. The stream seed is
//! `derive_seed(parent, index)`: the parent seed is offset by
//! `(index + 1) * 0x9E37_79B9_7F4A_7C15` (wrapping) and passed through the
//! SplitMix64 finalizer. Work can therefore be scheduled in any order or on
//! any number of threads without changing results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function.
pub fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed number `index` of `parent`.
pub fn derive_seed(parent: u64, index: u64) -> u64 {
    splitmix64(parent.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generator for child stream `index` of `parent`.
pub fn child_rng(parent: u64, index: u64) -> ChaCha8Rng {
    rng_from_seed(derive_seed(parent, index))
}
