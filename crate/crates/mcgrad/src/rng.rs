//! Seeded random number generation.
//!
//! Every sampler and training loop in the crate takes an explicit
//! [`SeededRng`]. Identical seeds yield identical draw sequences, and
//! [`SeededRng::split`] derives statistically independent streams so that
//! parallel cells of an experiment sweep do not share randomness.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// A reproducible random number generator (ChaCha8, seeded from a `u64`).
#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    inner: ChaCha8Rng,
}

/// SplitMix64 finalizer; used to derive child seeds.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// The seed this generator was created with.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Derive an independent generator keyed by `tag`.
    ///
    /// The child seed depends only on `(seed, tag)`, never on how many
    /// draws were made, so a cell's randomness is independent of which
    /// other cells ran before it.
    pub fn split(&self, tag: u64) -> SeededRng {
        SeededRng::new(splitmix64(self.seed ^ splitmix64(tag)))
    }

    /// Uniform draw on the open interval (0, 1); never exactly 0 or 1.
    pub fn uniform_open(&mut self) -> f64 {
        loop {
            let u: f64 = self.inner.random();
            if u > 0.0 {
                return u;
            }
        }
    }

    /// Uniform draw on [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        let u: f64 = self.inner.random();
        lo + u * (hi - lo)
    }

    /// Standard normal draw.
    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    /// Fair random sign: +1.0 or -1.0.
    pub fn sign(&mut self) -> f64 {
        if self.inner.random::<bool>() {
            1.0
        } else {
            -1.0
        }
    }

    /// Uniform index in `0..n`. Panics if `n == 0`.
    pub fn index(&mut self, n: usize) -> usize {
        assert!(n > 0, "index range must be nonempty");
        self.inner.random_range(0..n)
    }

    /// `k` distinct indices drawn uniformly from `0..n` (partial
    /// Fisher-Yates). Returns all of `0..n` when `k >= n`.
    pub fn sample_without_replacement(&mut self, n: usize, k: usize) -> Vec<usize> {
        let k = k.min(n);
        let mut idx: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + self.index(n - i);
            idx.swap(i, j);
        }
        idx.truncate(k);
        idx
    }

    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        let n = xs.len();
        for i in 0..n.saturating_sub(1) {
            let j = i + self.index(n - i);
            xs.swap(i, j);
        }
    }
}
