//! Seeded random streams.
//!
//! Every random decision in the crate draws from a ChaCha stream derived from
//! a user seed plus a purpose-specific stream id, so independent runs never
//! share generator state and results do not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream ids for the different consumers of randomness.
pub mod streams {
    pub const FOLDS: u64 = 1;
    pub const WEIGHT_INIT: u64 = 2;
    pub const PERCEPTRON_ORDER: u64 = 3;
    pub const BASELINE: u64 = 4;
    pub const GENERATOR: u64 = 5;
}

pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derives a child seed for run `run_id` (a restart, a fold, ...).
pub fn derive_seed(seed: u64, run_id: u64) -> u64 {
    // splitmix64 finalizer over the combined value
    let mut z = seed ^ run_id.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
