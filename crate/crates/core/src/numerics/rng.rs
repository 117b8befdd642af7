//! Seeded random numbers.
//!
//! The generator is xoshiro256++ (Blackman & Vigna), seeded through SplitMix64
//! as `rand_xoshiro` does. Independent streams are derived from a root seed and
//! a stream index by `splitmix64(root ^ splitmix64(index))`, so stream `s` can
//! be regenerated without touching streams `0..s`.

use rand::{Rng as _, RngCore, SeedableRng};
use rand_distr::{Distribution, StandardNormal};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{invalid, Result};

/// SplitMix64 finaliser.
pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic pseudo-random stream.
#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    inner: Xoshiro256PlusPlus,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self { seed, inner: Xoshiro256PlusPlus::seed_from_u64(seed) }
    }

    /// Child stream `index` of the root seed `root`.
    pub fn stream(root: u64, index: u64) -> Self {
        Self::new(splitmix64(root ^ splitmix64(index)))
    }

    /// Child stream of this generator's seed (does not advance `self`).
    pub fn child(&self, index: u64) -> Self {
        Self::stream(self.seed, index)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform draw from `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Uniform draw from `[-bound, bound)`.
    pub fn symmetric_uniform(&mut self, bound: f64) -> f64 {
        bound * (2.0 * self.uniform() - 1.0)
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    /// Uniform index in `0..len`; `len` must be positive.
    pub fn index(&mut self, len: usize) -> usize {
        self.inner.random_range(0..len)
    }

    /// Fisher–Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.inner.random_range(0..=i);
            items.swap(i, j);
        }
    }
}

impl RngCore for Rng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// One normal draw with the given mean and standard deviation.
pub fn gaussian(rng: &mut Rng, mean: f64, stddev: f64) -> Result<f64> {
    if !(stddev > 0.0) || !stddev.is_finite() {
        return Err(invalid!("standard deviation must be positive and finite, got {stddev}"));
    }
    Ok(mean + stddev * rng.standard_normal())
}
