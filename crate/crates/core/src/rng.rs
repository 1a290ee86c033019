//! Seed splitting and the small set of variates the simulator draws.
//!
//! Every random stream in the crate is a ChaCha8 generator keyed by a 64-bit
//! seed. Child seeds are derived with [`split_seed`], a SplitMix64 finalizer
//! applied to the parent seed and the child key, so replicate `k` of master
//! seed `s` always sees the same numbers no matter which thread runs it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Reserved key for the marks sampler inside a replicate.
pub const MARKS_KEY: u64 = u64::MAX;
/// Reserved key for per-vertex driving streams inside a replicate.
pub const STREAMS_KEY: u64 = u64::MAX - 1;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive the seed of child `key` from `seed`.
pub fn split_seed(seed: u64, key: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ splitmix64(key.wrapping_add(0xD1B5_4A32_D192_ED03)))
}

pub fn stream(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform on (0, 1].
pub fn uniform_open_closed<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

/// Exponential with the given rate (> 0).
pub fn exponential<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    -libm::log(uniform_open_closed(rng)) / rate
}

pub fn index<R: Rng + ?Sized>(rng: &mut R, n: usize) -> usize {
    rng.random_range(0..n)
}
