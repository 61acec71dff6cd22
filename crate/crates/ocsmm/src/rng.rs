//! Deterministic sampling primitives for the synthetic generators.
//!
//! Reproducibility contract: every generator in this crate draws from a
//! ChaCha8 stream seeded with `seed_from_u64`, and converts raw `u64` output
//! with the fixed transforms below (53-bit mantissa uniforms, Box-Muller
//! normals, product-form Poisson). The same seed therefore yields the same
//! dataset on every platform, and the conventions are simple enough to
//! replicate outside Rust.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Seeded random stream wrapping ChaCha8.
pub struct Stream {
    rng: ChaCha8Rng,
    cached_normal: Option<f64>,
}

impl Stream {
    pub fn new(seed: u64) -> Self {
        Stream {
            rng: ChaCha8Rng::seed_from_u64(seed),
            cached_normal: None,
        }
    }

    /// Uniform on `[0, 1)`: the top 53 bits of one `u64` draw.
    pub fn uniform01(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `(0, 1]`, safe as a logarithm argument.
    pub fn uniform01_open_low(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform01()
    }

    /// Standard normal via Box-Muller on two uniforms; the second value of
    /// each pair is cached so draws come in a fixed order.
    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.cached_normal.take() {
            return z;
        }
        let u1 = self.uniform01_open_low();
        let u2 = self.uniform01();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.cached_normal = Some(r * theta.sin());
        r * theta.cos()
    }

    /// Normal with the given mean and standard deviation.
    pub fn normal(&mut self, mean: f64, std_dev: f64) -> f64 {
        mean + std_dev * self.standard_normal()
    }

    /// Poisson draw by the product-of-uniforms method. Exact for the rates
    /// used here (`exp(-lambda)` stays far above the subnormal range for
    /// lambda up to ~700).
    pub fn poisson(&mut self, lambda: f64) -> u64 {
        assert!(lambda > 0.0 && lambda < 700.0, "poisson rate out of range");
        let threshold = (-lambda).exp();
        let mut k = 0u64;
        let mut prod = 1.0;
        loop {
            prod *= self.uniform01_open_low();
            if prod <= threshold {
                return k;
            }
            k += 1;
        }
    }

    /// Index into cumulative weights: smallest `i` with `u < cum[i]`.
    /// `weights` must sum to 1 (within rounding); used for mixture picks.
    pub fn pick_weighted(&mut self, weights: &[f64]) -> usize {
        let u = self.uniform01();
        let mut acc = 0.0;
        for (i, w) in weights.iter().enumerate() {
            acc += w;
            if u < acc {
                return i;
            }
        }
        weights.len() - 1
    }

    /// First `k` elements of a Fisher-Yates shuffle over `0..n`: a uniform
    /// sample of `k` distinct indices, order-sensitive to the stream.
    pub fn sample_indices(&mut self, n: usize, k: usize) -> Vec<usize> {
        assert!(k <= n);
        let mut idx: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + (self.rng.next_u64() as usize) % (n - i);
            idx.swap(i, j);
        }
        idx.truncate(k);
        idx
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = Stream::new(42);
        let mut b = Stream::new(42);
        for _ in 0..100 {
            assert_eq!(a.uniform01().to_bits(), b.uniform01().to_bits());
        }
    }

    #[test]
    fn uniform_in_range() {
        let mut s = Stream::new(1);
        for _ in 0..1000 {
            let u = s.uniform(0.2, 0.3);
            assert!((0.2..0.3).contains(&u));
        }
    }

    #[test]
    fn normal_moments_roughly_standard() {
        let mut s = Stream::new(7);
        let n = 200_000;
        let (mut sum, mut sumsq) = (0.0, 0.0);
        for _ in 0..n {
            let z = s.standard_normal();
            sum += z;
            sumsq += z * z;
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }

    #[test]
    fn poisson_mean_close_to_rate() {
        let mut s = Stream::new(11);
        let n = 2000;
        let total: u64 = (0..n).map(|_| s.poisson(300.0)).sum();
        let mean = total as f64 / n as f64;
        assert!((mean - 300.0).abs() < 2.0, "mean {mean}");
    }

    #[test]
    fn sample_indices_distinct_and_in_range() {
        let mut s = Stream::new(3);
        let idx = s.sample_indices(100, 30);
        assert_eq!(idx.len(), 30);
        let mut seen = std::collections::HashSet::new();
        for &i in &idx {
            assert!(i < 100);
            assert!(seen.insert(i));
        }
    }
}
