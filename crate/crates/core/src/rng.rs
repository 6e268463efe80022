//! Seeded randomness.
//!
//! Every random decision in the toolkit draws from [`ChaCha8Rng`] seeded
//! with a 64-bit value through `SeedableRng::seed_from_u64`. Child seeds
//! are derived from a parent seed and a textual label as the first eight
//! bytes (little-endian) of `SHA-256(parent_le_bytes || label_utf8)`.
//! One master seed therefore fixes every stage of a run, and independent
//! stages never share a stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Rng = ChaCha8Rng;

/// Generator for `seed`.
pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent child seed for the stage named `label`.
pub fn derive_seed(parent: u64, label: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(parent.to_le_bytes());
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    #[test]
    fn derivation_is_stable_and_label_sensitive() {
        assert_eq!(derive_seed(42, "embed"), derive_seed(42, "embed"));
        assert_ne!(derive_seed(42, "embed"), derive_seed(42, "split"));
        assert_ne!(derive_seed(42, "embed"), derive_seed(43, "embed"));
    }

    #[test]
    fn same_seed_same_stream() {
        let a: Vec<u64> = (0..8).map({
            let mut r = rng(7);
            move |_| r.random()
        }).collect();
        let mut r = rng(7);
        let b: Vec<u64> = (0..8).map(|_| r.random()).collect();
        assert_eq!(a, b);
    }
}
