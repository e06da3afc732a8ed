//! Deterministic random streams.
//!
//! Every stochastic consumer gets its own generator, seeded from the run seed
//! and a path of integers naming the consumer. Parallel work therefore never
//! shares a generator and results do not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a base seed with a path of stream identifiers.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix(base), |acc, &p| splitmix(acc ^ splitmix(p)))
}

pub fn stream(base: u64, path: &[u64]) -> SimRng {
    SimRng::seed_from_u64(derive_seed(base, path))
}

/// Stream tags used by the harness.
pub mod tag {
    pub const INIT: u64 = 1;
    pub const EPISODE: u64 = 2;
    pub const EVOLUTION: u64 = 3;
    pub const FITNESS: u64 = 4;
    pub const RULE_EVAL: u64 = 5;
    pub const OPPONENT: u64 = 6;
    pub const REPLAY: u64 = 7;
    pub const UPDATE: u64 = 8;
    pub const EVAL: u64 = 9;
    pub const ACTION: u64 = 10;
}
