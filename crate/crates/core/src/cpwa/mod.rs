//! Grid-based CPWA approximation of a controller.
//!
//! The domain is tiled by an η-grid; on a shrunken ball around every grid
//! center the approximation is constant and equal to the controller's value
//! at the center. In between, gap regions are filled by the recursive corner
//! interpolation of [`gamma`], applied on the nonzero coordinates of the gap
//! index and held constant along the others. Each output coordinate is an
//! independent scalar CPWA.

mod gamma;
mod partition;
mod pieces;

pub use gamma::{gamma_eval, GammaFunction, GammaPiece};
pub use partition::{GapIndex, Partition};
pub use pieces::Piece;

use partition::AxisPos;
use serde::{Deserialize, Serialize};

use crate::sampling::Halton;
use crate::{Controller, Error, Exec, Hyperbox, Result};

/// A sampled center value that fell outside the control box and was clamped.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeViolation {
    pub center_index: Vec<usize>,
    pub value: Vec<f64>,
    pub clamped: Vec<f64>,
}

/// Plateau values on a [`Partition`] plus the interpolating extension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCpwa {
    #[serde(flatten)]
    partition: Partition,
    m: usize,
    /// Row-major over centers, output coordinate innermost.
    values: Vec<f64>,
}

impl GridCpwa {
    pub fn from_values(partition: Partition, m: usize, values: Vec<f64>) -> Result<Self> {
        partition.validate()?;
        if m == 0 || values.len() != partition.center_count() * m {
            return Err(Error::InvalidInput(format!(
                "expected {} values ({} centers x {m} outputs), got {}",
                partition.center_count() * m,
                partition.center_count(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("plateau value".into()));
        }
        Ok(Self { partition, m, values })
    }

    /// Sample `oracle` at every grid center. Values outside `control_box`
    /// are clamped into it and reported.
    pub fn build(
        oracle: &dyn Controller,
        partition: Partition,
        control_box: Option<&Hyperbox>,
    ) -> Result<(Self, Vec<RangeViolation>)> {
        let count = partition.center_count();
        let mut values = Vec::new();
        let mut violations = Vec::new();
        let mut m = None;
        for flat in 0..count {
            let idx = partition.unflatten(flat);
            let u = oracle.control(&partition.center(&idx));
            match m {
                None => m = Some(u.len()),
                Some(m) if m != u.len() => {
                    return Err(Error::InvalidInput("oracle output dimension changed".into()))
                }
                _ => {}
            }
            if let Some(b) = control_box {
                if b.dim() != u.len() {
                    return Err(Error::InvalidInput("control box dimension mismatch".into()));
                }
                if !b.contains(&u) {
                    let clamped = b.clamp(&u);
                    log::warn!("oracle value {u:?} at center {idx:?} outside U; clamped");
                    violations.push(RangeViolation { center_index: idx, value: u, clamped: clamped.clone() });
                    values.extend(clamped);
                    continue;
                }
            }
            values.extend(u);
        }
        let cpwa = Self::from_values(partition, m.unwrap_or(0), values)?;
        Ok((cpwa, violations))
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn output_dim(&self) -> usize {
        self.m
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Plateau value at a grid center.
    pub fn center_value(&self, idx: &[usize]) -> &[f64] {
        let f = self.partition.flat_index(idx);
        &self.values[f * self.m..(f + 1) * self.m]
    }

    fn eval_positions(&self, pos: &[AxisPos]) -> Vec<f64> {
        let gap_axes: Vec<usize> = (0..pos.len())
            .filter(|&k| matches!(pos[k], AxisPos::Gap { .. }))
            .collect();
        let s: Vec<f64> = gap_axes
            .iter()
            .map(|&k| match pos[k] {
                AxisPos::Gap { s, .. } => s,
                AxisPos::Fixed(_) => unreachable!(),
            })
            .collect();
        let base: Vec<usize> = pos
            .iter()
            .map(|p| match *p {
                AxisPos::Fixed(j) => j,
                AxisPos::Gap { lo, .. } => lo,
            })
            .collect();
        let corners = 1usize << gap_axes.len();
        let mut corner_flat = Vec::with_capacity(corners);
        let mut idx = base.clone();
        for c in 0..corners {
            for (bit, &k) in gap_axes.iter().enumerate() {
                idx[k] = base[k] + ((c >> bit) & 1);
            }
            corner_flat.push(self.partition.flat_index(&idx));
        }
        let mut corner_vals = vec![0.0; corners];
        (0..self.m)
            .map(|o| {
                for (v, f) in corner_vals.iter_mut().zip(&corner_flat) {
                    *v = self.values[f * self.m + o];
                }
                gamma_eval(&corner_vals, &s)
            })
            .collect()
    }

    /// Evaluate at `x`; points outside the domain box are clamped onto it.
    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.partition.dim(), "point dimension");
        let x = self.partition.domain.clamp(x);
        let pos: Vec<AxisPos> = x.iter().enumerate().map(|(k, &v)| self.partition.axis_pos(k, v)).collect();
        self.eval_positions(&pos)
    }

    /// Evaluate at `x`, rejecting points outside the domain box.
    pub fn eval_strict(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.partition.dim() {
            return Err(Error::InvalidInput("point dimension".into()));
        }
        if !self.partition.domain.contains(x) {
            return Err(Error::OutOfDomain { point: x.to_vec() });
        }
        Ok(self.eval(x))
    }

    /// Evaluate at `x` using the construction attached to the given region
    /// rather than the canonical one. `x` must lie in that region.
    pub fn eval_in_region(&self, x: &[f64], region: &GapIndex) -> Result<Vec<f64>> {
        let contains = self.partition.regions_containing(x)?;
        if !contains.contains(region) {
            return Err(Error::InvalidInput(format!("{x:?} is not in region {region:?}")));
        }
        let pos: Vec<AxisPos> = x
            .iter()
            .enumerate()
            .map(|(k, &v)| self.partition.axis_pos_in_region(k, v, region.center_index[k], region.iota[k]))
            .collect();
        Ok(self.eval_positions(&pos))
    }

    /// The corner-interpolation function active on the gap cube of the
    /// canonical region containing `x` (restricted to its nonzero axes).
    pub fn gamma_at(&self, x: &[f64], output: usize) -> Result<GammaFunction> {
        let g = self.partition.classify(x, true)?;
        let x = self.partition.domain.clamp(x);
        let pos: Vec<AxisPos> = x
            .iter()
            .enumerate()
            .map(|(k, &v)| self.partition.axis_pos_in_region(k, v, g.center_index[k], g.iota[k]))
            .collect();
        let gap_axes: Vec<usize> = (0..pos.len()).filter(|&k| matches!(pos[k], AxisPos::Gap { .. })).collect();
        let base: Vec<usize> = pos
            .iter()
            .map(|p| match *p {
                AxisPos::Fixed(j) => j,
                AxisPos::Gap { lo, .. } => lo,
            })
            .collect();
        let vals = (0..1usize << gap_axes.len())
            .map(|c| {
                let mut idx = base.clone();
                for (bit, &k) in gap_axes.iter().enumerate() {
                    idx[k] += (c >> bit) & 1;
                }
                self.center_value(&idx)[output]
            })
            .collect();
        GammaFunction::new(gap_axes.len(), vals)
    }

    /// Parse and validate a JSON document produced by `serde_json`.
    pub fn from_json(s: &str) -> Result<Self> {
        let raw: Self = serde_json::from_str(s).map_err(|e| Error::InvalidInput(e.to_string()))?;
        Self::from_values(raw.partition, raw.m, raw.values)
    }
}

impl Controller for GridCpwa {
    fn control(&self, x: &[f64]) -> Vec<f64> {
        self.eval(x)
    }
}

/// `max ‖cpwa(x) − oracle(x)‖_∞` over `num_samples` seeded low-discrepancy
/// points of the domain.
pub fn sup_error(cpwa: &GridCpwa, oracle: &dyn Controller, num_samples: usize, seed: u64, exec: Exec) -> f64 {
    let domain = &cpwa.partition().domain;
    let seq = Halton::new(domain.dim(), seed);
    exec.max(num_samples, |i| {
        let x = seq.point(domain, i);
        let a = cpwa.eval(&x);
        let b = oracle.control(&x);
        crate::sup_dist(&a, &b)
    })
    .max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(eta: f64) -> Partition {
        Partition::new(Hyperbox::cube(2, -1.0, 1.0).unwrap(), eta, 0.5).unwrap()
    }

    #[test]
    fn constant_oracle_is_constant() {
        let oracle = |_: &[f64]| vec![1.5, -2.0];
        let (c, v) = GridCpwa::build(&oracle, square(0.3), None).unwrap();
        assert!(v.is_empty());
        for x in [[0.0, 0.0], [-1.0, 1.0], [0.123, -0.77]] {
            assert_eq!(c.eval(&x), vec![1.5, -2.0]);
        }
        assert_eq!(sup_error(&c, &oracle, 1000, 1, Exec::Sequential), 0.0);
    }

    #[test]
    fn centers_reproduce_oracle() {
        let oracle = |x: &[f64]| vec![x[0].sin() + x[1] * x[1]];
        let p = square(0.25);
        let (c, _) = GridCpwa::build(&oracle, p.clone(), None).unwrap();
        assert_eq!(p.center_count(), 64);
        for f in 0..p.center_count() {
            let x = p.center(&p.unflatten(f));
            assert_eq!(c.eval(&x), oracle(&x));
        }
    }

    #[test]
    fn one_dim_gap_midpoint() {
        let p = Partition::new(Hyperbox::cube(1, 0.0, 2.0).unwrap(), 1.0, 0.5).unwrap();
        let c = GridCpwa::from_values(p, 1, vec![0.0, 6.0]).unwrap();
        assert_eq!(c.eval(&[1.0]), vec![3.0]);
        assert_eq!(c.eval(&[0.5]), vec![0.0]);
        assert_eq!(c.eval(&[0.0]), vec![0.0]);
        assert_eq!(c.eval(&[1.75]), vec![6.0]);
        assert!((c.eval(&[0.875])[0] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn corner_gap_midpoint_is_average() {
        let p = Partition::new(Hyperbox::cube(2, 0.0, 2.0).unwrap(), 1.0, 0.5).unwrap();
        // centers (0.5,0.5)=1, (0.5,1.5)=2, (1.5,0.5)=3, (1.5,1.5)=4 (row-major, last axis fastest)
        let c = GridCpwa::from_values(p, 1, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(c.eval(&[1.0, 1.0]), vec![2.5]);
        let g = c.gamma_at(&[1.0, 1.0], 0).unwrap();
        assert_eq!(g.dim(), 2);
        assert_eq!(g.eval(&[0.5, 0.5]), 2.5);
    }

    #[test]
    fn linear_oracle_error_bound_1d() {
        let a = 0.7;
        let oracle = move |x: &[f64]| vec![a * x[0]];
        let eta = 0.2;
        let p = Partition::new(Hyperbox::cube(1, -1.0, 1.0).unwrap(), eta, 0.5).unwrap();
        let (c, _) = GridCpwa::build(&oracle, p, None).unwrap();
        // brute-force sup over a dense uniform grid
        let brute = (0..=10_000)
            .map(|i| {
                let x = -1.0 + 2.0 * i as f64 / 10_000.0;
                (c.eval(&[x])[0] - a * x).abs()
            })
            .fold(0.0, f64::max);
        assert!(brute <= a * eta);
        // K_cont = a, mu = 6*a*eta gives the mu/3 bound with room to spare
        assert!(brute <= 6.0 * a * eta / 3.0);
    }

    #[test]
    fn oracle_range_is_clamped() {
        let oracle = |x: &[f64]| vec![10.0 * x[0]];
        let ubox = Hyperbox::cube(1, -6.0, 6.0).unwrap();
        let (c, v) = GridCpwa::build(&oracle, square(0.5), Some(&ubox)).unwrap();
        assert_eq!(v.len(), 8); // |10 * 0.75| > 6 on two columns of 4
        assert!(c.values().iter().all(|u| u.abs() <= 6.0));
    }

    #[test]
    fn self_comparison_is_zero() {
        let oracle = |x: &[f64]| vec![(3.0 * x[0]).cos() * x[1]];
        let (c, _) = GridCpwa::build(&oracle, square(0.4), None).unwrap();
        let e = sup_error(&c, &c, 5000, 9, Exec::Parallel);
        assert!(e <= 1e-12);
    }

    #[test]
    fn clamping_and_strict_eval() {
        let oracle = |x: &[f64]| vec![x[0] + x[1]];
        let (c, _) = GridCpwa::build(&oracle, square(0.5), None).unwrap();
        assert_eq!(c.eval(&[5.0, 5.0]), c.eval(&[1.0, 1.0]));
        assert!(matches!(c.eval_strict(&[5.0, 0.0]), Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn region_evaluation_is_consistent() {
        let oracle = |x: &[f64]| vec![(2.0 * x[0]).sin() * x[1] + x[0]];
        let (c, _) = GridCpwa::build(&oracle, square(0.3), None).unwrap();
        let seq = Halton::new(2, 5);
        let dom = Hyperbox::cube(2, -1.0, 1.0).unwrap();
        for i in 0..2000 {
            let x = seq.point(&dom, i);
            let canonical = c.eval(&x);
            for r in c.partition().regions_containing(&x).unwrap() {
                let v = c.eval_in_region(&x, &r).unwrap();
                assert!((v[0] - canonical[0]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn json_roundtrip_bit_exact() {
        let oracle = |x: &[f64]| vec![(x[0] * 1e-3).exp() / 3.0, x[1] * std::f64::consts::PI];
        let (c, _) = GridCpwa::build(&oracle, square(0.3), None).unwrap();
        let s = serde_json::to_string(&c).unwrap();
        let back = GridCpwa::from_json(&s).unwrap();
        assert_eq!(back.values().len(), c.values().len());
        assert!(back.values().iter().zip(c.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
        assert_eq!(back, c);
        let bad = s.replace("\"m\":2", "\"m\":3");
        assert!(GridCpwa::from_json(&bad).is_err());
    }
}
