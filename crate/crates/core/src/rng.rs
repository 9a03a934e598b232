//! Deterministic derived random streams.
//!
//! Each stream is a ChaCha8 generator whose seed is a SplitMix64 fold of the
//! run seed, a purpose tag and any number of coordinates (iteration, sample
//! index, ...). Workers that own distinct coordinates can run in any order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Purpose tags for derived streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    ModelInit = 1,
    Training = 2,
    Scoring = 3,
    Candidates = 4,
    RandomSelection = 5,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds `coords` into `base` to produce a new 64-bit seed.
pub fn derive_seed(base: u64, coords: &[u64]) -> u64 {
    coords
        .iter()
        .fold(splitmix64(base), |acc, &c| splitmix64(acc ^ splitmix64(c)))
}

/// A stream for `purpose` at the given coordinates under run seed `seed`.
pub fn stream(seed: u64, purpose: Purpose, coords: &[u64]) -> StreamRng {
    let mut all = Vec::with_capacity(coords.len() + 1);
    all.push(purpose as u64);
    all.extend_from_slice(coords);
    ChaCha8Rng::seed_from_u64(derive_seed(seed, &all))
}

pub fn seeded(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}
