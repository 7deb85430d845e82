use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Axis-aligned box `[lower, upper]` in `ℝⁿ`, used for both the state domain
/// and the control set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperbox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Hyperbox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let b = Self { lower, upper };
        b.validate()?;
        Ok(b)
    }

    /// The cube `[lo, hi]ⁿ`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn validate(&self) -> Result<()> {
        if self.lower.is_empty() || self.lower.len() != self.upper.len() {
            return Err(Error::InvalidInput(format!(
                "box bounds must be non-empty and of equal length ({} vs {})",
                self.lower.len(),
                self.upper.len()
            )));
        }
        for (k, (lo, hi)) in self.lower.iter().zip(&self.upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                return Err(Error::InvalidInput(format!(
                    "axis {k}: need finite lower < upper, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn width(&self, k: usize) -> f64 {
        self.upper[k] - self.lower[k]
    }

    /// Largest per-axis width.
    pub fn extent(&self) -> f64 {
        (0..self.dim()).map(|k| self.width(k)).fold(0.0, f64::max)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| *lo <= *v && *v <= *hi)
    }

    pub fn clamp(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (lo, hi))| v.clamp(*lo, *hi))
            .collect()
    }

    /// Sup-norm distance from an interior point to the boundary (negative
    /// outside the box).
    pub fn boundary_distance(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (lo, hi))| (v - lo).min(hi - v))
            .fold(f64::INFINITY, f64::min)
    }

    /// Membership in `edge_δ(X)`: points of the box within sup-distance `δ`
    /// of its boundary.
    pub fn in_edge(&self, x: &[f64], delta: f64) -> bool {
        self.contains(x) && self.boundary_distance(x) <= delta
    }

    /// Map a point of `[0,1]ⁿ` into the box.
    pub fn from_unit(&self, s: &[f64]) -> Vec<f64> {
        s.iter()
            .enumerate()
            .map(|(k, t)| self.lower[k] + t * self.width(k))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_axes() {
        assert!(Hyperbox::new(vec![0.0], vec![0.0]).is_err());
        assert!(Hyperbox::new(vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(Hyperbox::new(vec![], vec![]).is_err());
        assert!(Hyperbox::new(vec![f64::NAN], vec![1.0]).is_err());
    }

    #[test]
    fn extent_and_edges() {
        let b = Hyperbox::new(vec![-1.0, -0.5], vec![1.0, 0.5]).unwrap();
        assert_eq!(b.extent(), 2.0);
        assert!(b.in_edge(&[0.95, 0.0], 0.1));
        assert!(!b.in_edge(&[0.0, 0.0], 0.1));
        assert!(b.in_edge(&[0.0, 0.45], 0.05));
        assert!(!b.in_edge(&[2.0, 0.0], 0.1));
        assert_eq!(b.clamp(&[3.0, -3.0]), vec![1.0, -0.5]);
    }
}
