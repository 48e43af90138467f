//! Seedable, splittable random streams.
//!
//! Backed by ChaCha8, a counter-based generator: `(seed, stream)` fixes the
//! whole sequence, so per-trial streams give bit-identical results regardless
//! of how trials are scheduled across workers.

use std::f64::consts::{PI, TAU};

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::qcore::UnitVector3;

/// Default seed used by the command line when none is given.
pub const DEFAULT_SEED: u64 = 0xC0FFEE;

#[derive(Debug, Clone)]
pub struct LabRng {
    inner: ChaCha8Rng,
}

impl LabRng {
    pub fn new(seed: u64) -> Self {
        LabRng {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Independent stream `stream` of the generator keyed by `seed`.
    pub fn stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        LabRng { inner }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `lo..=hi`.
    pub fn int_in(&mut self, lo: usize, hi: usize) -> usize {
        debug_assert!(lo <= hi);
        let span = (hi - lo + 1) as u64;
        lo + (self.next_u64() % span) as usize
    }

    /// Uniform direction on the unit sphere (z = 2u − 1, φ = 2πv).
    pub fn unit_vector(&mut self) -> UnitVector3 {
        let z = 2.0 * self.uniform() - 1.0;
        let phi = TAU * self.uniform();
        let r = (1.0 - z * z).max(0.0).sqrt();
        UnitVector3::normalized([r * phi.cos(), r * phi.sin(), z]).expect("sphere sample is nonzero")
    }

    /// Uniformly distributed rotation matrix (from a uniform unit quaternion).
    pub fn rotation(&mut self) -> [[f64; 3]; 3] {
        let (u1, u2, u3) = (self.uniform(), self.uniform(), self.uniform());
        let a = (1.0 - u1).sqrt();
        let b = u1.sqrt();
        let (w, x, y, z) = (
            a * (2.0 * PI * u2).sin(),
            a * (2.0 * PI * u2).cos(),
            b * (2.0 * PI * u3).sin(),
            b * (2.0 * PI * u3).cos(),
        );
        [
            [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - z * w), 2.0 * (x * z + y * w)],
            [2.0 * (x * y + z * w), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - x * w)],
            [2.0 * (x * z - y * w), 2.0 * (y * z + x * w), 1.0 - 2.0 * (x * x + y * y)],
        ]
    }

    /// Weights drawn from a flat Dirichlet distribution.
    pub fn simplex_weights(&mut self, n: usize) -> Vec<f64> {
        let raw: Vec<f64> = (0..n).map(|_| -(1.0 - self.uniform()).ln()).collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|w| w / total).collect()
    }
}
