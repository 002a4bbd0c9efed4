//! Seeded random streams.
//!
//! Every random draw in the crate goes through [`Rng`], a ChaCha8 stream
//! generator. ChaCha output is defined bit-for-bit by its algorithm, so a
//! given seed yields the same splits, initial frames and shuffles on every
//! platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream `stream` under the same key. Used to give restarts and
/// trials their own generators without correlating them.
pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derives a child seed from a parent seed and an index.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    use rand::RngCore;
    stream(seed, index.wrapping_add(1)).next_u64()
}
