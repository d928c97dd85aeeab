//! Seeded low-discrepancy streams.
//!
//! The stream is the additive recurrence `frac(shift + n·g)` with the
//! generalized golden ratio vector `g_j = φ_d^{-(j+1)}` (the R_d sequence),
//! randomized by a Cranley–Patterson shift drawn from a ChaCha stream keyed by
//! the 64-bit seed. The map seed → points is a pure function.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug)]
pub struct QuasiRandom {
    increments: Vec<f64>,
    shift: Vec<f64>,
}

impl QuasiRandom {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim >= 1);
        let phi = generalized_golden_ratio(dim);
        let increments = (1..=dim).map(|j| phi.powi(-(j as i32)).fract()).collect();
        let mut rng = rng_from_seed(seed);
        let shift = (0..dim).map(|_| rng.gen::<f64>()).collect();
        QuasiRandom { increments, shift }
    }

    pub fn dim(&self) -> usize {
        self.increments.len()
    }

    /// The `n`-th point, in `[0, 1)^dim`.
    pub fn point(&self, n: u64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.point_into(n, &mut out);
        out
    }

    pub fn point_into(&self, n: u64, out: &mut [f64]) {
        // split n so the product keeps its low-order bits for large n
        let hi = (n >> 20) as f64 * (1u64 << 20) as f64;
        let lo = (n & ((1 << 20) - 1)) as f64;
        for ((o, g), s) in out.iter_mut().zip(&self.increments).zip(&self.shift) {
            let v = s + (hi * g).fract() + (lo * g).fract();
            *o = v.fract();
        }
    }
}

/// Unique positive root of `x^{d+1} = x + 1`.
fn generalized_golden_ratio(dim: usize) -> f64 {
    let mut x = 2.0f64;
    for _ in 0..64 {
        x = (1.0 + x).powf(1.0 / (dim as f64 + 1.0));
    }
    x
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
