//! Deterministic seed derivation.
//!
//! Every source of randomness in the library flows from a single `u64` seed
//! per task. Sub-streams (k-means restarts, permutation replicates, Monte
//! Carlo datasets, ...) derive their own seeds from `(seed, stream, index)`
//! so that concurrent and serial execution consume identical randomness.

use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;

/// Stream tags for derived seeds. Values are arbitrary but fixed forever.
pub mod stream {
    pub const KMEANS_RESTART: u64 = 0x01;
    pub const KMEANS_OUTER: u64 = 0x02;
    pub const INIT_ERROR: u64 = 0x03;
    pub const PERMUTE: u64 = 0x04;
    pub const GAP_FIT: u64 = 0x05;
    pub const TUNE_STEP: u64 = 0x06;
    pub const SIM_MEANS: u64 = 0x07;
    pub const SIM_COV: u64 = 0x08;
    pub const SIM_DRAW: u64 = 0x09;
    pub const BENCH_DATA: u64 = 0x0a;
    pub const BENCH_METHOD: u64 = 0x0b;
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Derive a child seed from `(seed, stream, index)`.
pub fn derive_seed(seed: u64, stream: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(stream ^ splitmix64(index)))
}

/// Deterministic, platform-independent RNG seeded from a derived seed.
pub fn derive_rng(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, stream, index))
}
