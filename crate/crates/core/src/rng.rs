//! Deterministic, hierarchical RNG streams.
//!
//! Every stochastic step derives its generator from the master seed and a
//! path of tags, so results do not depend on scheduling or worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream tags. Values are arbitrary but must never change.
pub mod tag {
    pub const DRAWS: u64 = 0x01;
    pub const OBSERVED_FOCAL: u64 = 0x02;
    pub const SPLIT: u64 = 0x03;
    pub const PERMUTATION: u64 = 0x04;
    pub const GRAPH: u64 = 0x10;
    pub const REPLICATION: u64 = 0x11;
    pub const TREATMENT: u64 = 0x12;
    pub const NOISE: u64 = 0x13;
    pub const TARGET: u64 = 0x20;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedStream(u64);

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl SeedStream {
    pub fn new(master: u64) -> Self {
        SeedStream(splitmix64(master))
    }

    pub fn child(self, tag: u64) -> Self {
        SeedStream(splitmix64(self.0 ^ splitmix64(tag.wrapping_add(0x5851_F42D_4C95_7F2D))))
    }

    pub fn rng(self) -> StreamRng {
        ChaCha8Rng::seed_from_u64(self.0)
    }

    pub fn value(self) -> u64 {
        self.0
    }
}
