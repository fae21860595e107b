//! Counter-based random streams.
//!
//! Every run draws from its own ChaCha8 stream keyed by `(seed, stream)`, so a
//! run's randomness never depends on which other runs share a batch or on the
//! order in which worker threads pick them up.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stream used for action sampling and reward noise inside a run.
pub const RUN_STREAM: u64 = 0;
/// Stream used to derive per-run seeds from a master seed.
pub const SEED_STREAM: u64 = 1;
/// Base stream for instance generation; the instance key is added to it.
pub const INSTANCE_STREAM: u64 = 1 << 32;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// The `index`-th child seed of `master`. Random access: does not depend on
/// any other index.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut rng = stream_rng(master, SEED_STREAM);
    // Each u64 consumes two 32-bit words of the keystream.
    rng.set_word_pos(2 * index as u128);
    rng.next_u64()
}

/// `count` child seeds of `master`.
pub fn derive_seeds(master: u64, count: usize) -> Vec<u64> {
    (0..count as u64).map(|i| derive_seed(master, i)).collect()
}

/// Generator for instance draws keyed by `key` (e.g. the arm count).
pub fn instance_rng(master: u64, key: u64) -> ChaCha8Rng {
    stream_rng(master, INSTANCE_STREAM.wrapping_add(key))
}
