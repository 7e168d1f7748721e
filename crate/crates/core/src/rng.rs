//! Seed plumbing. Every random draw in the workspace flows from a `u64` seed
//! through [`SeededRng`]; sub-streams are derived with [`mix64`].

use rand::SeedableRng;

pub type SeededRng = rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer applied to `seed ^ golden * (stream + 1)`.
pub fn mix64(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ 0x9E37_79B9_7F4A_7C15u64.wrapping_mul(stream.wrapping_add(1));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn rng_from_seed(seed: u64) -> SeededRng {
    SeededRng::seed_from_u64(seed)
}

/// FNV-1a over the bytes of `s`, finalized through [`mix64`].
pub fn hash_str(s: &str) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for b in s.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    mix64(h, 0)
}
