//! Seeded random streams.
//!
//! All randomness in the workbench flows from a single root seed through
//! named substreams, so each stage (phantom generation, training, sampling,
//! noise simulation) is independently reproducible.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// SplitMix64 finalizer; full-period bijective mixer.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Derive a substream seed from a root seed and a stream name.
///
/// Stable across runs and platforms: FNV-1a over the name bytes, mixed
/// with the root seed through SplitMix64.
pub fn substream_seed(root: u64, name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in name.as_bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix64(root ^ splitmix64(h))
}

/// Deterministic RNG for a named substream of a root seed.
pub fn substream(root: u64, name: &str) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(substream_seed(root, name))
}

/// Deterministic RNG seeded directly.
pub fn seeded(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}
