//! Seed derivation. Every random stream in a run is a ChaCha8 generator seeded
//! from the run seed and a stream label, so independent components never share
//! draws and results do not depend on execution order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Combines a base seed with any number of stream labels.
pub fn derive_seed(base: u64, labels: &[u64]) -> u64 {
    labels.iter().fold(mix64(base), |acc, &l| mix64(acc ^ mix64(l)))
}

pub fn rng_for(base: u64, labels: &[u64]) -> Rng {
    Rng::seed_from_u64(derive_seed(base, labels))
}

/// Stream labels used by the BO loop and diagnostics.
pub mod stream {
    pub const DOE: u64 = 1;
    pub const FIT: u64 = 2;
    pub const ACQ: u64 = 3;
    pub const RANDOM_SEARCH: u64 = 4;
    pub const BENCHMARK: u64 = 5;
    pub const DATA: u64 = 6;
    pub const REPLACEMENT: u64 = 7;
}
