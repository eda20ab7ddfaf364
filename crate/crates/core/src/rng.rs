//! Seed derivation and the generator used for every random draw.
//!
//! All randomness comes from [`ChaCha8Rng`], which produces the same stream on
//! every platform. Independent streams are never shared: each consumer derives
//! its own seed from a master seed plus a list of indices, e.g.
//! `derive_seed(master, &[image_index, frame_index])` for a sensor frame.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng as Generator;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from `master` and an ordered list of stream indices.
///
/// The mapping is a pure function of its inputs; different index lists (including
/// lists that differ only in order or length) give unrelated seeds.
pub fn derive_seed(master: u64, indices: &[u64]) -> u64 {
    let mut h = mix64(master ^ GOLDEN);
    for (pos, &i) in indices.iter().enumerate() {
        h = mix64(h ^ mix64(i.wrapping_add(GOLDEN.wrapping_mul(pos as u64 + 1))));
    }
    mix64(h ^ (indices.len() as u64))
}

/// Seed a generator from a 64-bit seed.
pub fn generator(seed: u64) -> Generator {
    Generator::seed_from_u64(seed)
}

/// Hash a string into a stream index (FNV-1a).
pub fn hash_str(s: &str) -> u64 {
    fnv1a64(s.as_bytes())
}

/// FNV-1a over raw bytes.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
