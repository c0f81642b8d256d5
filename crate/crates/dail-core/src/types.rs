//! Small shared domain types.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;

/// Identifier of a stored sample. Matches the originating dataset entry id,
/// so prediction records and bank snapshots stay cross-referenceable.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SampleId(pub String);

impl SampleId {
    pub fn new(id: impl Into<String>) -> Self {
        SampleId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SampleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for SampleId {
    fn from(s: &str) -> Self {
        SampleId(s.to_string())
    }
}

/// 64-bit FNV-1a, optionally seeded. Used wherever a stable, portable text
/// hash is needed (feature hashing, per-query randomness). The std hasher is
/// not guaranteed stable across releases, so we keep our own.
pub fn fnv1a64(bytes: &[u8], seed: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x100_0000_01b3);
    }
    h
}

/// Deterministic RNG derived from a list of 64-bit parts (seed, operation
/// tag, counter, ...). Stateless derivation keeps streamed runs resumable:
/// the RNG for any operation is a pure function of durable state.
pub fn rng_from_parts(parts: &[u64]) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    let mut acc: u64 = 0x6a09_e667_f3bc_c908;
    for (i, chunk) in key.chunks_mut(8).enumerate() {
        let part = parts.get(i).copied().unwrap_or(0);
        acc = fnv1a64(&part.to_le_bytes(), acc);
        chunk.copy_from_slice(&acc.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn fnv_is_deterministic_and_seed_sensitive() {
        assert_eq!(fnv1a64(b"abc", 0), fnv1a64(b"abc", 0));
        assert_ne!(fnv1a64(b"abc", 0), fnv1a64(b"abc", 1));
        assert_ne!(fnv1a64(b"abc", 0), fnv1a64(b"abd", 0));
    }

    #[test]
    fn rng_parts_distinguish_tag_and_counter() {
        let a: u64 = rng_from_parts(&[7, 1, 0]).random();
        let b: u64 = rng_from_parts(&[7, 1, 1]).random();
        let c: u64 = rng_from_parts(&[7, 2, 0]).random();
        let a2: u64 = rng_from_parts(&[7, 1, 0]).random();
        assert_eq!(a, a2);
        assert_ne!(a, b);
        assert_ne!(a, c);
    }
}
