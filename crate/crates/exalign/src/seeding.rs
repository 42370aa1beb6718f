//! Deterministic seed derivation.
//!
//! One master seed fans out into independent per-stage and per-instance
//! streams. Derivation is a fixed hash, so any stage can be re-run in
//! isolation and reproduce its RNG stream exactly.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Derive a child seed from `(master, label, counter)`.
///
/// FNV-1a over the label bytes mixed with splitmix64 finalizers; stable
/// across platforms.
pub fn derive_seed(master: u64, label: &str, counter: u64) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x100000001b3);
    }
    splitmix(splitmix(master ^ h).wrapping_add(counter))
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// The crate-wide RNG. ChaCha keeps streams identical across platforms.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
