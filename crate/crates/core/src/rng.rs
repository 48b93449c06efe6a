//! Seeded random streams.
//!
//! Each consumer derives its own ChaCha8 stream from a base seed and a stage
//! label through splitmix64, so stages stay reproducible independently of
//! how many draws other stages make.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// One round of the splitmix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stage labels for the generation pipeline.
pub mod stage {
    pub const ROADS: u64 = 1;
    pub const BUILDINGS: u64 = 2;
    pub const ELEMENTS: u64 = 3;
    pub const TRAFFIC: u64 = 4;
    pub const SIGNALS: u64 = 5;
    pub const SIM: u64 = 6;
    pub const MMNAV: u64 = 7;
    pub const MRS: u64 = 8;
    pub const DATASET: u64 = 9;
    pub const AGENT: u64 = 10;
}

pub fn derive_seed(seed: u64, stage: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ splitmix64(stage.wrapping_mul(0xD1B5_4A32_D192_ED03)))
}

pub fn stage_rng(seed: u64, stage: u64) -> SimRng {
    SimRng::seed_from_u64(derive_seed(seed, stage))
}

/// Sub-stream for the `index`-th item of a stage (e.g. task k on a map).
pub fn indexed_rng(seed: u64, stage: u64, index: u64) -> SimRng {
    SimRng::seed_from_u64(splitmix64(derive_seed(seed, stage) ^ splitmix64(index)))
}
