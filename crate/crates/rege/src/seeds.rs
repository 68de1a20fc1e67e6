//! Deterministic seed derivation.
//!
//! Every source of randomness in the crate is fed from an explicit `u64` seed
//! through [`derive`], so that distinct purposes (weight init, dropout masks,
//! noise draws, splits, ...) consume independent streams. Two runs with the
//! same seed are bit-identical on every platform.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags. Values are arbitrary but fixed forever; changing one changes
/// every downstream random draw.
pub mod stream {
    pub const INIT: u64 = 0x01;
    pub const DROPOUT: u64 = 0x02;
    pub const NOISE: u64 = 0x03;
    pub const SPLIT: u64 = 0x04;
    pub const SBM: u64 = 0x05;
    pub const FLIP: u64 = 0x06;
    pub const DICE: u64 = 0x07;
    pub const EPOCH: u64 = 0x08;
    pub const TEACHER: u64 = 0x09;
    pub const STUDENT: u64 = 0x0A;
    pub const ATTACK: u64 = 0x0B;
    pub const MDR: u64 = 0x0C;
}

/// Mixes a base seed with a stream tag (or counter) via the SplitMix64
/// finalizer. Good avalanche, cheap, stateless.
pub fn derive(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a seed from a base seed, a stream tag and a counter.
pub fn derive2(seed: u64, tag: u64, counter: u64) -> u64 {
    derive(derive(seed, tag), counter)
}

/// A seeded ChaCha8 generator for the given stream.
pub fn rng(seed: u64, tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(seed, tag))
}
