//! Replicate seeding.
//!
//! Replicate `r` of an experiment with base seed `s` draws from a
//! ChaCha8 stream keyed by `mix(s, r)`. Streams depend only on `(s, r)`,
//! never on scheduling, so results are identical for any worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type ReplicateRng = ChaCha8Rng;

#[inline]
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed of replicate `replicate` under `base_seed`.
pub fn replicate_seed(base_seed: u64, replicate: u64) -> u64 {
    splitmix64(splitmix64(base_seed) ^ splitmix64(replicate.wrapping_add(0xA5A5_A5A5)))
}

pub fn replicate_rng(base_seed: u64, replicate: u64) -> ReplicateRng {
    ChaCha8Rng::seed_from_u64(replicate_seed(base_seed, replicate))
}
