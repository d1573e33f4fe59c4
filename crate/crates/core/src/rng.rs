//! Deterministic seeding helpers.
//!
//! All randomness in the crate flows through ChaCha8 streams derived from a
//! single user seed, so identical configurations reproduce bit-identical
//! runs regardless of platform.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer; decorrelates derived seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent stream for (seed, domain tag).
pub fn stream(seed: u64, tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(seed ^ mix(tag)))
}

/// Domain tags for the crate's RNG streams.
pub mod tags {
    pub const MODEL_INIT: u64 = 1;
    pub const SHUFFLE: u64 = 2;
    pub const SPLIT: u64 = 3;
    pub const SYNTH_CLASS: u64 = 4;
    pub const SYNTH_SAMPLE: u64 = 5;
    pub const PROTOCOL: u64 = 6;
}
