//! Seed derivation for reproducible randomness.
//!
//! All stochastic stages (scene generation, noise synthesis, mutation,
//! RANSAC, ...) draw from [`ChaCha8Rng`] streams derived from a single master
//! seed plus a structured context (generation, population slot, purpose).
//! Because every consumer derives its own stream, the number of worker
//! threads never changes results.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags keep independent random streams from colliding even when the
/// rest of the context (seed, generation, slot) is identical.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Scene,
    Path,
    InitPopulation,
    Crossover,
    Mutation,
    NoiseSynthesis,
    Ransac,
    Training,
}

impl Stream {
    pub fn tag(self) -> u64 {
        match self {
            Stream::Scene => 1,
            Stream::Path => 2,
            Stream::InitPopulation => 3,
            Stream::Crossover => 4,
            Stream::Mutation => 5,
            Stream::NoiseSynthesis => 6,
            Stream::Ransac => 7,
            Stream::Training => 8,
        }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Mix a master seed with arbitrary context words into a single sub-seed.
pub fn derive(master: u64, parts: &[u64]) -> u64 {
    let mut h = splitmix64(master ^ 0x6a09_e667_f3bc_c908);
    for &p in parts {
        h = splitmix64(h ^ splitmix64(p));
    }
    h
}

/// RNG for a (master seed, generation, slot, purpose) evaluation context.
pub fn rng_for(master: u64, generation: u64, slot: u64, stream: Stream) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(master, &[generation, slot, stream.tag()]))
}

/// RNG seeded directly from a bare seed (scene generation, CLI entry points).
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
