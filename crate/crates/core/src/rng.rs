//! Seeded random streams.
//!
//! Every random draw in the crate comes from ChaCha20 keyed by a root seed,
//! with the stream id selecting an independent counter space. Sub-streams are
//! addressed by a stable label hash plus an index, so parallel work units can
//! derive their own generator without sharing state.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Identifier recorded in output artifacts.
pub const RNG_ALGORITHM: &str = "chacha20";

pub type Rng = ChaCha20Rng;

/// FNV-1a, used only to turn stream labels into stream ids.
fn label_hash(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Generator for `(root, label, index)`.
pub fn stream(root: u64, label: &str, index: u64) -> Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(root);
    rng.set_stream(label_hash(label) ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    rng
}

/// Derive a child seed, for APIs that take a plain `u64`.
pub fn derive_seed(root: u64, label: &str, index: u64) -> u64 {
    use rand::RngCore;
    stream(root, label, index).next_u64()
}
