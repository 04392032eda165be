//! Deterministic counter-based randomness.
//!
//! Every stochastic ingredient in the crate (digit sampling, pair sampling,
//! annulus samples, sphere samples) draws from this generator so runs are
//! reproducible bit-for-bit from a seed, independent of platform and thread
//! count. The core is splitmix64 applied to `(seed, counter)`; there is no
//! mutable state, so parallel workers can index into the stream freely.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stateless keyed generator: `at(i)` is a pure function of `(seed, i)`.
#[derive(Clone, Copy, Debug)]
pub struct CounterRng {
    seed: u64,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    /// Derives an independent stream, for keying sub-tasks.
    pub fn stream(&self, label: u64) -> Self {
        Self {
            seed: splitmix64(self.seed ^ label.wrapping_mul(GOLDEN)),
        }
    }

    pub fn u64_at(&self, counter: u64) -> u64 {
        splitmix64(
            self.seed
                .wrapping_add(counter.wrapping_add(1).wrapping_mul(GOLDEN)),
        )
    }

    /// Uniform in `[0, bound)` by 128-bit multiply (no modulo bias worth
    /// caring about at these bounds).
    pub fn below_at(&self, counter: u64, bound: u64) -> u64 {
        debug_assert!(bound > 0);
        ((self.u64_at(counter) as u128 * bound as u128) >> 64) as u64
    }

    /// Uniform double in `[0, 1)` with 53 random bits.
    pub fn f64_at(&self, counter: u64) -> f64 {
        (self.u64_at(counter) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal via Box-Muller on counters `2i`, `2i+1`.
    pub fn normal_at(&self, counter: u64) -> f64 {
        let u1 = (self.u64_at(2 * counter) >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = self.f64_at(2 * counter + 1);
        let r = (-2.0 * (1.0 - u1).ln()).sqrt();
        r * (2.0 * std::f64::consts::PI * u2).cos()
    }

    /// Deterministic point on the Euclidean unit sphere in `R^d`.
    pub fn unit_vector_at(&self, counter: u64, d: usize) -> Vec<f64> {
        loop {
            let base = counter
                .wrapping_mul(d as u64 + 1)
                .wrapping_add(counter >> 7);
            let v: Vec<f64> = (0..d)
                .map(|c| self.stream(11).normal_at(base.wrapping_add(c as u64)))
                .collect();
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > 1e-8 {
                return v.iter().map(|x| x / n).collect();
            }
            // astronomically unlikely; fall through with a shifted counter
            return self.stream(13).unit_vector_at(counter, d);
        }
    }
}
