//! Seeded quasi-random sample sets over boxes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::Hyperbox;

const PRIMES: [u32; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = base as u64;
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += (i % b) as f64 * f;
        i /= b;
        f *= inv;
    }
    r
}

/// Randomly shifted Halton sequence: low-discrepancy, and fully determined by
/// `seed`. Point `i` is computable independently of every other point, which
/// keeps parallel sweeps deterministic.
#[derive(Debug, Clone)]
pub struct Halton {
    shift: Vec<f64>,
}

impl Halton {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim <= PRIMES.len(), "Halton sequence limited to {} dims", PRIMES.len());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            shift: (0..dim).map(|_| rng.random::<f64>()).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.shift.len()
    }

    /// Point `i` of the sequence in `[0,1)ⁿ`.
    pub fn unit(&self, i: usize) -> Vec<f64> {
        self.shift
            .iter()
            .zip(PRIMES)
            .map(|(s, p)| {
                let v = radical_inverse(i as u64 + 1, p) + s;
                v - v.floor()
            })
            .collect()
    }

    /// Point `i` mapped into `domain`.
    pub fn point(&self, domain: &Hyperbox, i: usize) -> Vec<f64> {
        domain.from_unit(&self.unit(i))
    }
}

/// Points of a regular grid with `per_axis` points per axis spanning the box
/// (endpoints included), in row-major order.
pub fn grid_points(domain: &Hyperbox, per_axis: usize) -> Vec<Vec<f64>> {
    let n = domain.dim();
    let total = per_axis.pow(n as u32);
    (0..total)
        .map(|mut idx| {
            let mut x = vec![0.0; n];
            for k in (0..n).rev() {
                let j = idx % per_axis;
                idx /= per_axis;
                let t = if per_axis == 1 { 0.5 } else { j as f64 / (per_axis - 1) as f64 };
                x[k] = domain.lower[k] + t * domain.width(k);
            }
            x
        })
        .collect()
}
