//! Seeded randomness. ChaCha8 gives the same stream on every platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seed for an independent sub-task, e.g. one sifting block.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    master ^ index
}
