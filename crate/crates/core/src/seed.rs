//! Stable seed derivation from names and counters.

use sha2::{Digest, Sha256};

/// First 8 bytes (little endian) of SHA-256 over `s`.
pub fn seed_from_str(s: &str) -> u64 {
    let digest = Sha256::digest(s.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

/// Seed for a tuple of labelled parts, e.g. `derive(base, &["box", "rpf", "17"])`.
pub fn derive(base: u64, parts: &[&str]) -> u64 {
    let mut h = Sha256::new();
    h.update(base.to_le_bytes());
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p.as_bytes());
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}
