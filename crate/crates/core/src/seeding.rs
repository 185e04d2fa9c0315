//! Deterministic seed derivation.
//!
//! All randomness in this crate flows from one root seed through
//! `(seed, label, index)` triples hashed into independent ChaCha streams.
//! Workers can therefore run in any order and in any number of threads
//! without changing a single sampled value.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Derive an independent RNG stream from `(root, label, index)`.
///
/// The derivation is SHA-256 of the little-endian root seed, the label
/// bytes and the little-endian index, used as the ChaCha key. Distinct
/// triples give computationally independent streams.
pub fn rng_for(root: u64, label: &str, index: u64) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(root.to_le_bytes());
    hasher.update(label.as_bytes());
    hasher.update(index.to_le_bytes());
    let key: [u8; 32] = hasher.finalize().into();
    ChaCha8Rng::from_seed(key)
}

/// Collapse `(root, label, index)` to a child root seed.
///
/// Used when a sub-task needs its own seed namespace (e.g. one sweep value
/// spawning many paths).
pub fn child_seed(root: u64, label: &str, index: u64) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(root.to_le_bytes());
    hasher.update(label.as_bytes());
    hasher.update(index.to_le_bytes());
    let out = hasher.finalize();
    u64::from_le_bytes(out[..8].try_into().expect("sha256 output is 32 bytes"))
}
