//! Deterministic seed derivation.
//!
//! Every random stream in the crate is a ChaCha8 generator seeded from a
//! master seed and a short tag path (replicate, particle slot, stage, ...).
//! Streams therefore never depend on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags used by the samplers.
pub mod tag {
    pub const PARTICLE: u64 = 0x5041_5254;
    pub const RESAMPLE: u64 = 0x5245_5341;
    pub const HYPER: u64 = 0x4859_5045;
    pub const REPLICATE: u64 = 0x5245_504c;
    pub const PRIOR: u64 = 0x5052_494f;
    pub const ITERATION: u64 = 0x4954_4552;
    pub const DATA: u64 = 0x4441_5441;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes `path` into `master`, one component at a time.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn rng_for(master: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, path))
}
