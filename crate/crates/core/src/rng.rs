//! Deterministic seeding.
//!
//! A single global seed fans out into independent ChaCha streams keyed by a
//! purpose label and an index. Stream selection is counter based, so the
//! generator handed to a work unit never depends on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Expands one global seed into per-purpose generators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedSplitter {
    seed: u64,
}

impl SeedSplitter {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Derived 64-bit seed for `(label, index)`.
    pub fn derive(&self, label: &str, index: u64) -> u64 {
        let mut h = splitmix64(self.seed ^ 0x5354_4f4b_4553_4446);
        for b in label.bytes() {
            h = splitmix64(h ^ u64::from(b));
        }
        splitmix64(h ^ splitmix64(index))
    }

    pub fn rng(&self, label: &str, index: u64) -> ChaCha8Rng {
        rng_from_seed(self.derive(label, index))
    }
}

/// Generator for a raw seed; stream 0 of ChaCha8.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}
