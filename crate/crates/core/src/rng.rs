//! Portable seeded random streams.
//!
//! Every stochastic step in the pipeline draws from [`SeededRng`]: a
//! xoshiro256++ generator seeded through SplitMix64. Derived values are
//! pinned to explicit formulas so a stream replays bit-for-bit on any
//! platform or in any language:
//!
//! * uniform `[0, 1)`: `(next_u64() >> 11) * 2^-53`
//! * integer below `n`: `(next_u64() as u128 * n) >> 64`
//! * shuffle: Fisher–Yates from the last index down, `j = below(i + 1)`
//! * standard normal: Box–Muller on `u1 = 1 - uniform()`, `u2 = uniform()`,
//!   yielding `r cos(2πu2)` then `r sin(2πu2)` with `r = sqrt(-2 ln u1)`

use rand_xoshiro::rand_core::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone)]
pub struct SeededRng {
    inner: Xoshiro256PlusPlus,
    spare_normal: Option<f64>,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: Xoshiro256PlusPlus::seed_from_u64(seed),
            spare_normal: None,
        }
    }

    /// Independent stream for `key` under `master`: the first 8 bytes
    /// (little-endian) of SHA-256(master as u64 LE ‖ key).
    pub fn derive(master: u64, key: &[u8]) -> Self {
        Self::new(stream_seed(master, key))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw from `[lo, hi)`; returns `lo` when the range is empty.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in `[0, n)`. `n` must be non-zero.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }

    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare_normal = Some(r * theta.sin());
        r * theta.cos()
    }
}

pub fn stream_seed(master: u64, key: &[u8]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update(key);
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}
