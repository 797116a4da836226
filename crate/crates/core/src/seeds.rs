//! Deterministic seed derivation.
//!
//! Every randomized step in the crate draws from a ChaCha stream whose seed
//! is derived from the run seed and a stream tag, so results never depend on
//! call order, thread scheduling, or platform hashing.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a sub-seed for an independent stream.
pub fn mix(seed: u64, stream: u64) -> u64 {
    splitmix(seed ^ splitmix(stream))
}

/// Seeded RNG with stable cross-platform output.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// FNV-1a over the string bytes. Stable across processes, unlike the
/// standard library hasher.
pub fn hash_str(s: &str) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for b in s.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}
