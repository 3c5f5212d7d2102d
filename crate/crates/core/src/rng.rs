//! Seed derivation for reproducible replications.
//!
//! Every random stream in the crate is a `ChaCha8Rng` seeded from a single
//! 64-bit value. Replication seeds are derived from a base seed with the
//! SplitMix64 finalizer, so any replication can be replayed in isolation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 output function (Steele, Lea & Flood 2014).
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replication `rep` at sample size `nu`:
/// `splitmix64(splitmix64(splitmix64(base) ^ nu) ^ rep)`.
pub fn replication_seed(base_seed: u64, nu: usize, rep: usize) -> u64 {
    let s = splitmix64(base_seed);
    let s = splitmix64(s ^ nu as u64);
    splitmix64(s ^ rep as u64)
}

/// Derives an independent stream seed for an auxiliary purpose (bootstrap, subsampling).
pub fn stream_seed(base_seed: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(base_seed ^ 0xA076_1D64_78BD_642F) ^ stream)
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
