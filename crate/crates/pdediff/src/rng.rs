//! Seeded, platform-independent random streams.
//!
//! Every stochastic component takes a `u64` seed and derives ChaCha8 streams
//! from it. Independent work items (dataset samples, robustness trials)
//! get their own stream via [`derive_stream`], so they can run in parallel
//! in any order and still reproduce bit-identically.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SeedRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SeedRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// splitmix64 finalizer; decorrelates consecutive (seed, index) pairs.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream `index` derived from `seed`: `hash(seed, index)`.
pub fn derive_stream(seed: u64, index: u64) -> SeedRng {
    rng_from_seed(mix(seed ^ mix(index)))
}
