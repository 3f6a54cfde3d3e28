//! Seed derivation for reproducible Monte Carlo runs.
//!
//! Every stochastic routine takes an explicit seed. Seeds for nested units
//! (axis point, trial, block, stream) are derived from a master seed by
//! hashing the unit's path, so any unit can be regenerated in isolation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Counter-based generator used throughout the crate.
pub type StreamRng = ChaCha8Rng;

pub fn stream(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `master` and a path of unit indices.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |acc, &p| splitmix64(acc ^ splitmix64(p.wrapping_add(0x5851_F42D_4C95_7F2D))))
}

/// Stream labels so that e.g. the signal and matrix of one trial never share a seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Signal = 1,
    Matrix = 2,
    Noise = 3,
    Solver = 4,
}

pub fn purpose_seed(trial_seed: u64, purpose: Purpose) -> u64 {
    derive_seed(trial_seed, &[purpose as u64])
}
