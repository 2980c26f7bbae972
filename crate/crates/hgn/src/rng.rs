//! Seeded random streams.
//!
//! Every random decision in a run draws from a ChaCha stream derived from
//! the run seed and a fixed stream tag, so runs are reproducible and the
//! streams (init, shuffle, negatives, data synthesis) stay independent of
//! each other.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const STREAM_INIT: u64 = 0x494e4954; // parameter initialization
pub const STREAM_SHUFFLE: u64 = 0x53485546; // epoch instance order
pub const STREAM_NEGATIVE: u64 = 0x4e454753; // negative sampling
pub const STREAM_SYNTH: u64 = 0x53594e54; // synthetic data generation

/// ChaCha generator for (`seed`, `stream`), mixed through SplitMix64 so
/// nearby seeds do not produce correlated streams.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut z = seed ^ stream.wrapping_mul(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^= z >> 31;
    ChaCha8Rng::seed_from_u64(z)
}
