//! Seed derivation.
//!
//! Every random quantity in the crate is driven by a [`ChaCha8Rng`] seeded
//! from a `u64`. Child seeds are derived with [`mix_seed`]:
//!
//! ```text
//! mix_seed(seed, index) = splitmix64(seed ^ splitmix64(index ^ 0x9E37_79B9_7F4A_7C15))
//! ```
//!
//! so that episode `e` of a run, or timestep `t` of an episode, can be
//! reproduced without replaying its siblings.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// One round of the SplitMix64 finalizer.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn mix_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index ^ 0x9E37_79B9_7F4A_7C15))
}

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
