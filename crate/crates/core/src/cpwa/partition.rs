use serde::{Deserialize, Serialize};

use crate::{Error, Hyperbox, Result};

/// Regular grid of sup-norm balls tiling the domain box, with plateau balls
/// of radius `ρ·pitch/2` around every center.
///
/// Per axis the cell count is `⌈width/η⌉` and the pitch shrinks to
/// `width/count`, so the grid tiles the box exactly and no cell is wider than
/// the requested `η`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub domain: Hyperbox,
    /// Requested pitch.
    pub eta: f64,
    /// Actual pitch per axis (`≤ eta`).
    pub pitch: Vec<f64>,
    /// Number of centers per axis.
    pub dims: Vec<usize>,
    pub rho: f64,
}

/// Region `ℛ^{(x_c)}(ι)` of the partition: `ι = 0` is the plateau around the
/// center, nonzero entries select the gap towards the neighbor on that side.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GapIndex {
    pub center_index: Vec<usize>,
    pub iota: Vec<i8>,
}

impl GapIndex {
    /// Number of nonzero entries of `ι`.
    pub fn dim(&self) -> usize {
        self.iota.iter().filter(|&&i| i != 0).count()
    }
}

/// Where a coordinate falls along one axis, for evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum AxisPos {
    /// Constant along this axis, taking the value of center `j`.
    Fixed(usize),
    /// In the gap between centers `lo` and `lo + 1`, at fraction `s ∈ [0,1]`.
    Gap { lo: usize, s: f64 },
}

/// Snap a ratio to the nearest integer when it is within floating-point
/// noise of it (so `2/(1/3)` gives 6 cells, not 7).
fn cell_count(width: f64, eta: f64) -> usize {
    let r = width / eta;
    let nearest = r.round();
    let c = if (r - nearest).abs() <= 1e-9 * r.max(1.0) { nearest } else { r.ceil() };
    (c as usize).max(1)
}

impl Partition {
    pub fn new(domain: Hyperbox, eta: f64, rho: f64) -> Result<Self> {
        domain.validate()?;
        if !(eta.is_finite() && eta > 0.0 && rho > 0.0 && rho < 1.0) {
            return Err(Error::InvalidPitch { eta, rho });
        }
        let dims: Vec<usize> = (0..domain.dim()).map(|k| cell_count(domain.width(k), eta)).collect();
        let total = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
        if total.is_none_or(|t| t > 1 << 40) {
            return Err(Error::Overflow(format!("grid with {dims:?} centers")));
        }
        let pitch = dims
            .iter()
            .enumerate()
            .map(|(k, &c)| domain.width(k) / c as f64)
            .collect();
        Ok(Self { domain, eta, pitch, dims, rho })
    }

    pub fn validate(&self) -> Result<()> {
        let fresh = Self::new(self.domain.clone(), self.eta, self.rho)?;
        if fresh.dims != self.dims {
            return Err(Error::InvalidInput(format!(
                "grid dims {:?} inconsistent with domain and pitch (expected {:?})",
                self.dims, fresh.dims
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn center_count(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn center_coord(&self, k: usize, j: usize) -> f64 {
        self.domain.lower[k] + (j as f64 + 0.5) * self.pitch[k]
    }

    pub fn center(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter().enumerate().map(|(k, &j)| self.center_coord(k, j)).collect()
    }

    /// Row-major flat index (last axis fastest).
    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.dims).fold(0, |acc, (&j, &d)| acc * d + j)
    }

    pub fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for k in (0..self.dim()).rev() {
            idx[k] = flat % self.dims[k];
            flat /= self.dims[k];
        }
        idx
    }

    /// Centers whose cells share a face of any dimension with the cell of
    /// `idx` (the cell itself excluded).
    pub fn neighbors(&self, idx: &[usize]) -> Vec<Vec<usize>> {
        let n = self.dim();
        let mut out = Vec::new();
        for code in 0..3usize.pow(n as u32) {
            let mut c = code;
            let mut nb = Vec::with_capacity(n);
            let mut ok = true;
            let mut moved = false;
            for k in 0..n {
                let step = (c % 3) as isize - 1;
                c /= 3;
                let j = idx[k] as isize + step;
                if j < 0 || j >= self.dims[k] as isize {
                    ok = false;
                    break;
                }
                moved |= step != 0;
                nb.push(j as usize);
            }
            if ok && moved {
                out.push(nb);
            }
        }
        out
    }

    fn half_plateau(&self, k: usize) -> f64 {
        0.5 * self.rho * self.pitch[k]
    }

    /// Interval `ω_k^{(x_c)}(ι)` for center `j` on axis `k`.
    pub fn omega(&self, k: usize, j: usize, iota: i8) -> (f64, f64) {
        let c = self.center_coord(k, j);
        let r = self.half_plateau(k);
        let h = self.pitch[k];
        match iota {
            0 => (c - r, c + r),
            1 => (c + r, c + h - r),
            _ => (c - h + r, c - r),
        }
    }

    /// All `(j, ι)` on axis `k` whose interval contains `x`, in increasing
    /// lexicographic order.
    fn axis_candidates(&self, k: usize, x: f64) -> Vec<(usize, i8)> {
        let t = (x - self.domain.lower[k]) / self.pitch[k];
        let j0 = (t.floor().max(0.0) as usize).min(self.dims[k] - 1);
        let mut out = Vec::new();
        for j in j0.saturating_sub(1)..=(j0 + 1).min(self.dims[k] - 1) {
            for iota in [-1i8, 0, 1] {
                let (a, b) = self.omega(k, j, iota);
                if a <= x && x <= b {
                    out.push((j, iota));
                }
            }
        }
        out
    }

    fn checked_point(&self, x: &[f64], clamp: bool) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::InvalidInput(format!(
                "point has dimension {}, partition has {}",
                x.len(),
                self.dim()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("point {x:?}")));
        }
        if clamp {
            Ok(self.domain.clamp(x))
        } else if self.domain.contains(x) {
            Ok(x.to_vec())
        } else {
            Err(Error::OutOfDomain { point: x.to_vec() })
        }
    }

    /// Canonical region containing `x`: among all `(center, ι)` whose region
    /// contains the point, the lexicographically smallest. With `clamp`,
    /// points outside the box are first projected onto it.
    pub fn classify(&self, x: &[f64], clamp: bool) -> Result<GapIndex> {
        let x = self.checked_point(x, clamp)?;
        let mut center_index = Vec::with_capacity(x.len());
        let mut iota = Vec::with_capacity(x.len());
        for (k, &v) in x.iter().enumerate() {
            let (j, i) = *self
                .axis_candidates(k, v)
                .first()
                .expect("regions cover the domain");
            center_index.push(j);
            iota.push(i);
        }
        Ok(GapIndex { center_index, iota })
    }

    /// Every region `(center, ι)` that contains `x` (inside the box).
    pub fn regions_containing(&self, x: &[f64]) -> Result<Vec<GapIndex>> {
        let x = self.checked_point(x, false)?;
        let per_axis: Vec<Vec<(usize, i8)>> =
            x.iter().enumerate().map(|(k, &v)| self.axis_candidates(k, v)).collect();
        let mut out = vec![GapIndex { center_index: vec![], iota: vec![] }];
        for cands in per_axis {
            out = out
                .into_iter()
                .flat_map(|g| {
                    cands.iter().map(move |&(j, i)| {
                        let mut g = g.clone();
                        g.center_index.push(j);
                        g.iota.push(i);
                        g
                    })
                })
                .collect();
        }
        Ok(out)
    }

    /// Evaluation position along axis `k` for a coordinate inside the box.
    pub(crate) fn axis_pos(&self, k: usize, x: f64) -> AxisPos {
        let c = self.dims[k];
        let t = (x - self.domain.lower[k]) / self.pitch[k] - 0.5;
        if t <= 0.0 {
            return AxisPos::Fixed(0);
        }
        let j = t.floor() as usize;
        if j >= c - 1 {
            return AxisPos::Fixed(c - 1);
        }
        let frac = t - j as f64;
        let r = 0.5 * self.rho;
        if frac <= r {
            AxisPos::Fixed(j)
        } else if frac >= 1.0 - r {
            AxisPos::Fixed(j + 1)
        } else {
            AxisPos::Gap { lo: j, s: ((frac - r) / (1.0 - self.rho)).clamp(0.0, 1.0) }
        }
    }

    /// Evaluation position along axis `k` when `x` is taken to lie in the
    /// region `(j, ι)`; boundary centers have no neighbor beyond the box, so
    /// their outer gaps stay constant along that axis.
    pub(crate) fn axis_pos_in_region(&self, k: usize, x: f64, j: usize, iota: i8) -> AxisPos {
        let gap_from = |lo: usize| {
            let start = self.center_coord(k, lo) + self.half_plateau(k);
            let s = (x - start) / ((1.0 - self.rho) * self.pitch[k]);
            AxisPos::Gap { lo, s: s.clamp(0.0, 1.0) }
        };
        match iota {
            0 => AxisPos::Fixed(j),
            1 if j + 1 < self.dims[k] => gap_from(j),
            -1 if j >= 1 => gap_from(j - 1),
            _ => AxisPos::Fixed(j),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(eta: f64) -> Partition {
        Partition::new(Hyperbox::cube(2, -1.0, 1.0).unwrap(), eta, 0.5).unwrap()
    }

    #[test]
    fn exact_division() {
        let p = square(0.5);
        assert_eq!(p.dims, vec![4, 4]);
        assert_eq!(p.center_count(), 16);
        let xs: Vec<f64> = (0..4).map(|j| p.center_coord(0, j)).collect();
        assert_eq!(xs, vec![-0.75, -0.25, 0.25, 0.75]);
    }

    #[test]
    fn pitch_shrinks_to_tile() {
        let p = square(0.3);
        assert_eq!(p.dims, vec![7, 7]);
        assert!((p.pitch[0] - 2.0 / 7.0).abs() < 1e-15);
        assert!(p.pitch[0] <= 0.3);
        // 1/3 computed the way the sizing chain does it
        let p = square(0.2 / (6.0 * 0.1));
        assert_eq!(p.dims, vec![6, 6]);
    }

    #[test]
    fn single_center() {
        let p = Partition::new(Hyperbox::cube(1, 0.0, 1.0).unwrap(), 1.0, 0.5).unwrap();
        assert_eq!(p.dims, vec![1]);
        assert_eq!(p.center(&[0]), vec![0.5]);
    }

    #[test]
    fn invalid_pitch() {
        let d = Hyperbox::cube(1, 0.0, 1.0).unwrap();
        assert!(matches!(Partition::new(d.clone(), 0.0, 0.5), Err(Error::InvalidPitch { .. })));
        assert!(matches!(Partition::new(d.clone(), 0.1, 1.0), Err(Error::InvalidPitch { .. })));
        assert!(matches!(Partition::new(d, 0.1, 0.0), Err(Error::InvalidPitch { .. })));
    }

    #[test]
    fn neighbors_interior_and_corner() {
        let p = square(0.5);
        assert_eq!(p.neighbors(&[1, 1]).len(), 8);
        assert_eq!(p.neighbors(&[0, 0]).len(), 3);
        assert_eq!(p.neighbors(&[0, 2]).len(), 5);
    }

    #[test]
    fn flat_index_roundtrip() {
        let p = Partition::new(Hyperbox::new(vec![0.0; 3], vec![1.0, 2.0, 3.0]).unwrap(), 0.5, 0.5).unwrap();
        for f in 0..p.center_count() {
            assert_eq!(p.flat_index(&p.unflatten(f)), f);
        }
        assert_eq!(p.flat_index(&[0, 0, 1]), 1);
    }

    #[test]
    fn classify_examples() {
        let p = square(0.5);
        let c = p.center(&[2, 1]);
        let g = p.classify(&c, false).unwrap();
        assert_eq!(g, GapIndex { center_index: vec![2, 1], iota: vec![0, 0] });

        // midline between horizontally adjacent centers (-0.25, 0.25) at y = 0.25
        let g = p.classify(&[0.0, 0.25], false).unwrap();
        assert_eq!(g, GapIndex { center_index: vec![1, 2], iota: vec![1, 0] });

        // grid corner shared by four plateaus
        let g = p.classify(&[0.0, 0.0], false).unwrap();
        assert_eq!(g, GapIndex { center_index: vec![1, 1], iota: vec![1, 1] });
        assert_eq!(g.dim(), 2);
        let all = p.regions_containing(&[0.0, 0.0]).unwrap();
        assert_eq!(all.len(), 4);
        assert!(all.iter().all(|r| r.iota.iter().all(|&i| i != 0)));
        assert_eq!(all.iter().min().unwrap(), &g);
    }

    #[test]
    fn classify_out_of_domain() {
        let p = square(0.5);
        assert!(matches!(p.classify(&[1.5, 0.0], false), Err(Error::OutOfDomain { .. })));
        let g = p.classify(&[1.5, 0.0], true).unwrap();
        assert_eq!(g.center_index[0], 3);
        assert_eq!(g.iota[0], 1);
    }

    #[test]
    fn every_point_has_exactly_one_canonical_region() {
        let p = square(0.3);
        for i in 0..=200 {
            for j in 0..=200 {
                let x = [-1.0 + i as f64 * 0.01, -1.0 + j as f64 * 0.01];
                let x = [x[0].min(1.0), x[1].min(1.0)];
                let all = p.regions_containing(&x).unwrap();
                assert!(!all.is_empty());
                assert_eq!(&p.classify(&x, false).unwrap(), all.iter().min().unwrap());
            }
        }
    }
}
