//! Seeded generator streams.
//!
//! Every stochastic routine takes an explicit generator. Parallel work derives
//! one independent ChaCha stream per task from a master seed so results do not
//! depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type BenchRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> BenchRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream `stream` under master `seed`.
pub fn stream(seed: u64, stream: u64) -> BenchRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
