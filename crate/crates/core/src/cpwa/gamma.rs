//! Recursive corner interpolation on the unit hypercube.
//!
//! Given values at the `2ᵏ` corners of `[0,1]ᵏ`, the interpolant is built face
//! by face: linear on edges, and on every higher-dimensional face the value
//! at the face midpoint is the average of the face's corners, blended
//! radially towards the interpolant on the face boundary. The result is
//! continuous and piecewise affine, with one affine piece per cone from the
//! midpoint over a piece of a facet.

use serde::{Deserialize, Serialize};

use crate::linalg::affine_through;
use crate::{Error, Result};

/// Corner data for the interpolant on `[0,1]ᵏ`. Corner `c` (an integer in
/// `0..2ᵏ`) sits at the point whose coordinate `i` is bit `i` of `c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaFunction {
    dim: usize,
    corner_values: Vec<f64>,
}

/// One affine piece of a [`GammaFunction`]: a `k`-simplex with the affine
/// map `x ↦ gradient·x + offset` that the interpolant equals on it.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaPiece {
    pub vertices: Vec<Vec<f64>>,
    pub gradient: Vec<f64>,
    pub offset: f64,
}

impl GammaFunction {
    pub fn new(dim: usize, corner_values: Vec<f64>) -> Result<Self> {
        if dim >= usize::BITS as usize || corner_values.len() != 1 << dim {
            return Err(Error::InvalidInput(format!(
                "{}-cube needs {} corner values, got {}",
                dim,
                1u128 << dim.min(127),
                corner_values.len()
            )));
        }
        if corner_values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("corner value".into()));
        }
        Ok(Self { dim, corner_values })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn corner_values(&self) -> &[f64] {
        &self.corner_values
    }

    /// Coordinates of corner `c`.
    pub fn corner(&self, c: usize) -> Vec<f64> {
        (0..self.dim).map(|i| ((c >> i) & 1) as f64).collect()
    }

    /// Evaluate at `x ∈ [0,1]ᵏ`. Coordinates are clamped into the cube.
    pub fn eval(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim, "point dimension");
        gamma_eval(&self.corner_values, x)
    }

    /// Enumerate the affine pieces: cones from the midpoint over the pieces of
    /// each facet, down to single segments on the edges. There are
    /// `2ᵏ⁻¹·k!` of them for `k ≥ 1` (one piece for `k = 0`).
    pub fn pieces(&self) -> Vec<GammaPiece> {
        simplices(self.dim)
            .into_iter()
            .map(|vertices| {
                let values: Vec<f64> = vertices.iter().map(|v| self.eval(v)).collect();
                let (gradient, offset) = if self.dim == 0 {
                    (Vec::new(), values[0])
                } else {
                    affine_through(&vertices, &values).expect("cone simplices are non-degenerate")
                };
                GammaPiece { vertices, gradient, offset }
            })
            .collect()
    }
}

/// Evaluate the corner interpolant with corner values `values` (length `2ᵏ`,
/// bit `i` of the index is coordinate `i`) at `x ∈ [0,1]ᵏ`.
pub fn gamma_eval(values: &[f64], x: &[f64]) -> f64 {
    let k = x.len();
    debug_assert_eq!(values.len(), 1 << k);
    match k {
        0 => values[0],
        1 => {
            let s = x[0].clamp(0.0, 1.0);
            let (a, b) = (values[0], values[1]);
            ((1.0 - s) * a + s * b).clamp(a.min(b), a.max(b))
        }
        _ => {
            let (lo, hi) = values
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
            let avg = values.iter().sum::<f64>() / values.len() as f64;

            // sup-norm distance from the midpoint and the coordinate attaining it
            let (axis, dist) = x
                .iter()
                .map(|v| (v.clamp(0.0, 1.0) - 0.5).abs())
                .enumerate()
                .fold((0, 0.0), |best, (i, d)| if d > best.1 { (i, d) } else { best });
            if dist == 0.0 {
                return avg.clamp(lo, hi);
            }

            // ray from the midpoint through x hits the facet {x_axis = side}
            let side = usize::from(x[axis] > 0.5);
            let scale = 0.5 / dist;
            let face_point: Vec<f64> = x
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != axis)
                .map(|(_, v)| (0.5 + (v.clamp(0.0, 1.0) - 0.5) * scale).clamp(0.0, 1.0))
                .collect();
            let face_values = restrict_to_facet(values, axis, side);
            let lambda = 1.0 - 2.0 * dist;
            (lambda * avg + (1.0 - lambda) * gamma_eval(&face_values, &face_point)).clamp(lo, hi)
        }
    }
}

/// Corner values of the facet `{x_axis = side}`, re-indexed over the
/// remaining coordinates.
fn restrict_to_facet(values: &[f64], axis: usize, side: usize) -> Vec<f64> {
    let k = values.len().trailing_zeros() as usize;
    let low_mask = (1usize << axis) - 1;
    (0..1usize << (k - 1))
        .map(|c| {
            let full = (c & low_mask) | (side << axis) | ((c & !low_mask) << 1);
            values[full]
        })
        .collect()
}

/// Vertex lists of the cone simplices decomposing `[0,1]ᵏ`.
fn simplices(k: usize) -> Vec<Vec<Vec<f64>>> {
    match k {
        0 => vec![vec![vec![]]],
        1 => vec![vec![vec![0.0], vec![1.0]]],
        _ => {
            let lower = simplices(k - 1);
            let mut out = Vec::with_capacity(2 * k * lower.len());
            for axis in 0..k {
                for side in [0.0, 1.0] {
                    for s in &lower {
                        let mut verts: Vec<Vec<f64>> = s
                            .iter()
                            .map(|v| {
                                let mut p = v.clone();
                                p.insert(axis, side);
                                p
                            })
                            .collect();
                        verts.push(vec![0.5; k]);
                        out.push(verts);
                    }
                }
            }
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn examples() {
        let zero = GammaFunction::new(2, vec![0.0; 4]).unwrap();
        assert_eq!(zero.eval(&[0.3, 0.9]), 0.0);
        let sq = GammaFunction::new(2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(sq.eval(&[0.5, 0.5]), 2.5);
        let seg = GammaFunction::new(1, vec![0.0, 1.0]).unwrap();
        assert_eq!(seg.eval(&[0.25]), 0.25);
    }

    #[test]
    fn rejects_wrong_corner_count() {
        assert!(GammaFunction::new(2, vec![0.0; 3]).is_err());
        assert!(GammaFunction::new(1, vec![0.0, f64::NAN]).is_err());
    }

    #[test]
    fn facet_restriction_indices() {
        let v: Vec<f64> = (0..8).map(f64::from).collect();
        // x1 = 1 facet of the 3-cube: corners 2,3,6,7
        assert_eq!(restrict_to_facet(&v, 1, 1), vec![2.0, 3.0, 6.0, 7.0]);
        assert_eq!(restrict_to_facet(&v, 0, 0), vec![0.0, 2.0, 4.0, 6.0]);
        assert_eq!(restrict_to_facet(&v, 2, 1), vec![4.0, 5.0, 6.0, 7.0]);
    }

    #[test]
    fn square_edges_are_linear() {
        let g = GammaFunction::new(2, vec![1.0, 5.0, -2.0, 7.0]).unwrap();
        for t in [0.0, 0.1, 0.37, 0.5, 0.99, 1.0] {
            assert!((g.eval(&[t, 0.0]) - (1.0 + 4.0 * t)).abs() < 1e-14);
            assert!((g.eval(&[1.0, t]) - (5.0 + 2.0 * t)).abs() < 1e-14);
        }
    }

    #[test]
    fn piece_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for k in 1..=3usize {
            let vals: Vec<f64> = (0..1 << k).map(|_| rng.random_range(-5.0..5.0)).collect();
            let g = GammaFunction::new(k, vals).unwrap();
            let pieces = g.pieces();
            let bound = (1usize << (k - 1)) * (1..=k).product::<usize>();
            assert_eq!(pieces.len(), bound);
            // each piece's affine map reproduces the interpolant inside it
            for p in &pieces {
                let c: Vec<f64> = (0..k)
                    .map(|i| p.vertices.iter().map(|v| v[i]).sum::<f64>() / p.vertices.len() as f64)
                    .collect();
                let lin: f64 = p.gradient.iter().zip(&c).map(|(a, b)| a * b).sum::<f64>() + p.offset;
                assert!((lin - g.eval(&c)).abs() < 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn corners_exact_and_range(k in 1usize..4, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let vals: Vec<f64> = (0..1 << k).map(|_| rng.random_range(-10.0..10.0)).collect();
            let g = GammaFunction::new(k, vals.clone()).unwrap();
            for c in 0..1 << k {
                prop_assert_eq!(g.eval(&g.corner(c)).to_bits(), vals[c].to_bits());
            }
            let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            for _ in 0..50 {
                let x: Vec<f64> = (0..k).map(|_| rng.random::<f64>()).collect();
                let v = g.eval(&x);
                prop_assert!(lo <= v && v <= hi);
            }
        }

        #[test]
        fn continuous_along_segments(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let vals: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
            let g = GammaFunction::new(3, vals).unwrap();
            let a: Vec<f64> = (0..3).map(|_| rng.random::<f64>()).collect();
            let b: Vec<f64> = (0..3).map(|_| rng.random::<f64>()).collect();
            // slope of each piece is bounded by 2^k * (max-min); steps of 1e-4 can move at most that much
            let steps = 2000;
            let mut prev = g.eval(&a);
            for s in 1..=steps {
                let t = s as f64 / steps as f64;
                let p: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + t * (y - x)).collect();
                let v = g.eval(&p);
                prop_assert!((v - prev).abs() < 2.0 * 8.0 * 2.0 * 3.0 / steps as f64);
                prev = v;
            }
        }
    }
}
