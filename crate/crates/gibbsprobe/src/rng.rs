//! Deterministic random-number streams.
//!
//! All stochastic operations in this crate draw from ChaCha12 keyed by a
//! caller-supplied 64-bit seed. Independent sub-computations (sample batches,
//! error-estimation replicates, pipeline models) consume *streams*: ChaCha's
//! 64-bit stream counter selects disjoint keystream blocks for the same key,
//! so `stream_rng(seed, a)` and `stream_rng(seed, b)` are statistically
//! independent whenever `a ≠ b`, regardless of how many values each consumes.
//! This makes parallel execution order irrelevant to results.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// The generator used throughout the crate.
pub type Rng = ChaCha12Rng;

/// Creates the RNG for stream `stream` of master seed `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
