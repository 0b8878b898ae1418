//! Deterministic named RNG streams fanned out from a single master seed.
//!
//! Every source of randomness in the engine (weight init, splits,
//! negative sampling, reparameterization noise) draws from its own
//! stream, so changing how often one consumer samples never perturbs
//! the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(seed: u64, label: &str) -> u64 {
    let mut h = FNV_OFFSET;
    for b in seed.to_le_bytes().iter().chain(label.as_bytes()) {
        h ^= u64::from(*b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Fans one master seed out into independent, platform-stable streams.
#[derive(Debug, Clone, Copy)]
pub struct SeedFan {
    master: u64,
}

impl SeedFan {
    pub fn new(master: u64) -> Self {
        Self { master }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    /// RNG for the stream named `label`. The same (seed, label) pair
    /// always yields the same stream.
    pub fn stream(&self, label: &str) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(fnv1a(self.master, label))
    }
}
