//! Seed-derived random streams.
//!
//! Every random draw in the crate comes from a [`Stream`] identified by a
//! 64-bit seed and a path of indices. The child seed of `(seed, i)` is
//! `splitmix64(seed ^ splitmix64(i + 1))`; a stream is a ChaCha8 generator
//! keyed by that seed. Work item `i` therefore sees the same numbers no
//! matter which thread runs it or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the `index`-th child of `seed`.
pub fn derive(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index.wrapping_add(1)))
}

/// Seed reached by following `path` from `seed`.
pub fn derive_path(seed: u64, path: &[u64]) -> u64 {
    path.iter().fold(seed, |s, &i| derive(s, i))
}

pub fn stream(seed: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stream for work item `index` under `seed`.
pub fn substream(seed: u64, index: u64) -> Stream {
    stream(derive(seed, index))
}

/// Named sub-seeds so independent phases of one run never share numbers.
pub mod domain {
    pub const SAMPLES: u64 = 0x5341_4D50;
    pub const SHADOWS: u64 = 0x5348_4457;
    pub const MEASURE: u64 = 0x4D45_4153;
    pub const TRIALS: u64 = 0x5452_4941;
    pub const TASK: u64 = 0x5441_534B;
}
