//! Seeded randomness shared by every module.
//!
//! All draws come from a ChaCha8 stream seeded with a `u64`
//! (`ChaCha8Rng::seed_from_u64`). Uniform floats in `[0, 1)` take the top 53
//! bits of one `u64` output scaled by `2^-53`; standard normals use the
//! ziggurat sampler of `rand_distr`. Both mappings are platform independent,
//! so a seed reproduces the same instance everywhere.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::polycore::Complex;

pub type DetRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> DetRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform01(rng: &mut DetRng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

pub fn standard_normal(rng: &mut DetRng) -> f64 {
    rng.sample(StandardNormal)
}

/// A point on the unit circle with uniformly distributed angle.
pub fn unit_complex(rng: &mut DetRng) -> Complex {
    Complex::from_polar(1.0, std::f64::consts::TAU * uniform01(rng))
}

/// A complex number with independent standard normal parts.
pub fn complex_normal(rng: &mut DetRng) -> Complex {
    Complex::new(standard_normal(rng), standard_normal(rng))
}
