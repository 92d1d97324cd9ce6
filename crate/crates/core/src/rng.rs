//! Hierarchical, order-independent seeding.
//!
//! Every random quantity in a simulation is drawn from a `ChaCha8Rng` whose
//! seed is derived from a parent seed and a list of integer tags. Two streams
//! with different tag paths are statistically independent, and a stream never
//! depends on how much randomness its siblings consumed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::{cis, C64};

pub type SimRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `parent` and a tag path.
pub fn derive_seed(parent: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix64(parent), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn child_rng(parent: u64, tags: &[u64]) -> SimRng {
    rng_from_seed(derive_seed(parent, tags))
}

/// Circularly-symmetric complex Gaussian sample with the given variance.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> C64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(s * re, s * im)
}

/// Unit-modulus sample with phase uniform on `[0, 2π)`.
pub fn unit_phase<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    cis(rng.random::<f64>() * std::f64::consts::TAU)
}
