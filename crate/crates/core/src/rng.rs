//! Seeded random streams.
//!
//! All randomness flows from explicit `u64` seeds. Generators are ChaCha8
//! (`rand_chacha::ChaCha8Rng::seed_from_u64`); child seeds are derived with
//! the SplitMix64 finalizer so that `derive_seed(master, i)` is a fixed,
//! portable function of its inputs. Uniform variates are built from the top
//! 53 bits of `next_u64`.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Recorded in experiment metadata.
pub const RNG_ALGORITHM: &str =
    "ChaCha8Rng::seed_from_u64 (rand_chacha 0.3); child seeds splitmix64(master ^ splitmix64(index)); uniforms from top 53 bits";

pub type Rng = ChaCha8Rng;

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for child stream `index` of `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index))
}

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform on [0, 1).
pub fn uniform01<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform on [lo, hi).
pub fn uniform_range<R: RngCore + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * uniform01(rng)
}

/// Uniform on {0, ..., n-1}.
pub fn uniform_index<R: RngCore + ?Sized>(rng: &mut R, n: usize) -> usize {
    ((uniform01(rng) * n as f64) as usize).min(n - 1)
}
