//! Seeded random streams.
//!
//! Every random draw in the crate comes from ChaCha20 (a counter-based
//! generator) keyed by a 64-bit seed. A seed owns 2^64 independent streams;
//! [`stream`] selects one by id, so work item `k` always sees the same
//! numbers no matter which thread runs it or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub type StreamRng = ChaCha20Rng;

/// Stream ids reserved for the pieces of a single analysis run.
pub mod purpose {
    pub const DATA: u64 = 0;
    pub const CV_TREATED: u64 = 1;
    pub const CV_CONTROL: u64 = 2;
    pub const CV_PROPENSITY: u64 = 3;
    /// Bootstrap draw `b` uses stream `BOOTSTRAP_BASE + b`.
    pub const BOOTSTRAP_BASE: u64 = 1 << 32;
}

pub fn stream(seed: u64, stream_id: u64) -> StreamRng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

/// Mixes a base seed with an index (splitmix64 finalizer), for handing
/// each replicate its own seed.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
