//! Seed derivation. Every random stream in a run is derived from the root seed and
//! a fixed path of integers, so adding a stream never perturbs the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream purposes used in seed paths.
pub mod purpose {
    pub const TRAIN: u64 = 1;
    pub const EXPAND: u64 = 2;
    pub const EVAL: u64 = 3;
    pub const SEARCH: u64 = 4;
    pub const SIMILARITY: u64 = 5;
    pub const EVAL_SET: u64 = 6;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(root: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(root), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn stream(root: u64, path: &[u64]) -> SimRng {
    SimRng::seed_from_u64(derive_seed(root, path))
}
