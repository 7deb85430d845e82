//! Explicit affine pieces of a [`GridCpwa`] in one and two dimensions.

use super::{GammaFunction, GridCpwa};
use crate::{Error, Result};

/// A convex polytope of the domain on which the CPWA is affine:
/// `u = weights · x + bias`. In two dimensions the vertices are listed
/// counter-clockwise.
#[derive(Debug, Clone, PartialEq)]
pub struct Piece {
    pub vertices: Vec<Vec<f64>>,
    /// `m` rows of length `n`.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl Piece {
    /// Affine map of output `k` evaluated at `x`.
    pub fn eval_output(&self, k: usize, x: &[f64]) -> f64 {
        self.weights[k].iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias[k]
    }

    /// Centroid of the vertices (an interior point).
    pub fn centroid(&self) -> Vec<f64> {
        let n = self.vertices[0].len();
        let mut c = vec![0.0; n];
        for v in &self.vertices {
            for (ci, vi) in c.iter_mut().zip(v) {
                *ci += vi;
            }
        }
        c.iter_mut().for_each(|ci| *ci /= self.vertices.len() as f64);
        c
    }
}

#[derive(Clone, Copy)]
enum Segment {
    Plateau { a: f64, b: f64, j: usize },
    Gap { a: f64, b: f64, lo: usize },
}

impl Segment {
    fn bounds(self) -> (f64, f64) {
        match self {
            Segment::Plateau { a, b, .. } | Segment::Gap { a, b, .. } => (a, b),
        }
    }
}

fn axis_segments(c: &GridCpwa, k: usize) -> Vec<Segment> {
    let p = c.partition();
    let n = p.dims[k];
    let (lo, hi) = (p.domain.lower[k], p.domain.upper[k]);
    let mut out = Vec::with_capacity(2 * n - 1);
    for j in 0..n {
        let (mut a, mut b) = p.omega(k, j, 0);
        if j == 0 {
            a = lo;
        }
        if j + 1 == n {
            b = hi;
        }
        out.push(Segment::Plateau { a, b, j });
        if j + 1 < n {
            let (ga, gb) = p.omega(k, j, 1);
            out.push(Segment::Gap { a: ga, b: gb, lo: j });
        }
    }
    out
}

fn sort_ccw(mut verts: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let cx = verts.iter().map(|v| v[0]).sum::<f64>() / verts.len() as f64;
    let cy = verts.iter().map(|v| v[1]).sum::<f64>() / verts.len() as f64;
    verts.sort_by(|a, b| {
        let ta = (a[1] - cy).atan2(a[0] - cx);
        let tb = (b[1] - cy).atan2(b[0] - cx);
        ta.total_cmp(&tb)
    });
    verts
}

impl GridCpwa {
    /// All affine pieces, for state dimension one or two.
    ///
    /// Plateaus (the outermost ones stretched to the box boundary) and gaps
    /// alternate along each axis; a gap-by-gap cell splits into four
    /// triangles meeting at its center.
    pub fn enumerate_pieces(&self) -> Result<Vec<Piece>> {
        let n = self.partition().dim();
        if n == 0 || n > 2 {
            return Err(Error::UnsupportedDimension(n));
        }
        let segs: Vec<Vec<Segment>> = (0..n).map(|k| axis_segments(self, k)).collect();
        let mut cells: Vec<Vec<Segment>> = vec![vec![]];
        for axis in &segs {
            cells = cells
                .into_iter()
                .flat_map(|c| {
                    axis.iter().map(move |s| {
                        let mut c = c.clone();
                        c.push(*s);
                        c
                    })
                })
                .collect();
        }
        let m = self.output_dim();
        let mut out = Vec::new();
        for cell in cells {
            let gap_axes: Vec<usize> = (0..n).filter(|&k| matches!(cell[k], Segment::Gap { .. })).collect();
            let base: Vec<usize> = cell
                .iter()
                .map(|s| match *s {
                    Segment::Plateau { j, .. } => j,
                    Segment::Gap { lo, .. } => lo,
                })
                .collect();
            let gammas: Vec<GammaFunction> = (0..m)
                .map(|o| {
                    let vals = (0..1usize << gap_axes.len())
                        .map(|c| {
                            let mut idx = base.clone();
                            for (bit, &k) in gap_axes.iter().enumerate() {
                                idx[k] += (c >> bit) & 1;
                            }
                            self.center_value(&idx)[o]
                        })
                        .collect();
                    GammaFunction::new(gap_axes.len(), vals)
                })
                .collect::<Result<_>>()?;
            let per_output: Vec<_> = gammas.iter().map(|g| g.pieces()).collect();
            let plateau_axes: Vec<usize> = (0..n).filter(|k| !gap_axes.contains(k)).collect();
            for s in 0..per_output[0].len() {
                let simplex = &per_output[0][s].vertices;
                let mut vertices = Vec::new();
                for sv in simplex {
                    for e in 0..1usize << plateau_axes.len() {
                        let mut v = vec![0.0; n];
                        for (g, &k) in gap_axes.iter().enumerate() {
                            let (a, b) = cell[k].bounds();
                            v[k] = a + sv[g] * (b - a);
                        }
                        for (bit, &k) in plateau_axes.iter().enumerate() {
                            let (a, b) = cell[k].bounds();
                            v[k] = if (e >> bit) & 1 == 0 { a } else { b };
                        }
                        vertices.push(v);
                    }
                }
                let vertices = if n == 2 {
                    sort_ccw(vertices)
                } else {
                    vertices.sort_by(|a, b| a[0].total_cmp(&b[0]));
                    vertices
                };
                let mut weights = vec![vec![0.0; n]; m];
                let mut bias = vec![0.0; m];
                for o in 0..m {
                    let gp = &per_output[o][s];
                    bias[o] = gp.offset;
                    for (g, &k) in gap_axes.iter().enumerate() {
                        let (a, b) = cell[k].bounds();
                        let w = gp.gradient[g] / (b - a);
                        weights[o][k] = w;
                        bias[o] -= w * a;
                    }
                }
                out.push(Piece { vertices, weights, bias });
            }
        }
        Ok(out)
    }
}
