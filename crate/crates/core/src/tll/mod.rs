//! Two-level lattice (min over groups of max over affine functions)
//! networks and their lowering to layered ReLU networks.

mod lattice;
mod polygon;
mod relu;

pub use lattice::FromPiecesOptions;
pub use relu::{arch_of_bound, lower_to_relu, ArchDescriptor, ReluNetwork, SparseLayer};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// `x ↦ w·x + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    pub w: Vec<f64>,
    pub b: f64,
}

impl Affine {
    pub fn new(w: Vec<f64>, b: f64) -> Self {
        Self { w, b }
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.w.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.b
    }

    fn approx_eq(&self, other: &Affine, tol: f64) -> bool {
        (self.b - other.b).abs() <= tol && self.w.iter().zip(&other.w).all(|(a, b)| (a - b).abs() <= tol)
    }
}

/// One output coordinate: `min_g max_{i ∈ groups[g]} linear_fns[i](x)`.
/// Group entries are zero-based indices into `linear_fns`, sorted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarTll {
    pub linear_fns: Vec<Affine>,
    pub groups: Vec<Vec<usize>>,
}

impl ScalarTll {
    pub fn new(linear_fns: Vec<Affine>, mut groups: Vec<Vec<usize>>) -> Result<Self> {
        for g in &mut groups {
            g.sort_unstable();
            g.dedup();
        }
        let s = Self { linear_fns, groups };
        s.validate(None)?;
        Ok(s)
    }

    fn validate(&self, n: Option<usize>) -> Result<()> {
        if self.linear_fns.is_empty() || self.groups.is_empty() {
            return Err(Error::InvalidInput("lattice needs at least one function and one group".into()));
        }
        let n = n.unwrap_or(self.linear_fns[0].w.len());
        for f in &self.linear_fns {
            if f.w.len() != n {
                return Err(Error::InvalidInput("affine maps of mixed dimension".into()));
            }
            if !f.b.is_finite() || f.w.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("affine coefficient".into()));
            }
        }
        for g in &self.groups {
            if g.is_empty() {
                return Err(Error::InvalidInput("empty selector group".into()));
            }
            if let Some(&i) = g.iter().find(|&&i| i >= self.linear_fns.len()) {
                return Err(Error::InvalidInput(format!("selector index {i} out of range")));
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let vals: Vec<f64> = self.linear_fns.iter().map(|f| f.eval(x)).collect();
        self.groups
            .iter()
            .map(|g| g.iter().map(|&i| vals[i]).fold(f64::NEG_INFINITY, f64::max))
            .fold(f64::INFINITY, f64::min)
    }
}

/// A vector-valued lattice network with `m` independent scalar outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TllNetwork {
    pub n: usize,
    pub m: usize,
    pub outputs: Vec<ScalarTll>,
}

impl TllNetwork {
    pub fn new(n: usize, outputs: Vec<ScalarTll>) -> Result<Self> {
        let net = Self { n, m: outputs.len(), outputs };
        net.validate()?;
        Ok(net)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 || self.outputs.len() != self.m {
            return Err(Error::InvalidInput("network dimensions".into()));
        }
        for o in &self.outputs {
            o.validate(Some(self.n))?;
            if o.groups.iter().any(|g| g.windows(2).any(|w| w[0] >= w[1])) {
                return Err(Error::InvalidInput("selector groups must be sorted".into()));
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n, "point dimension");
        self.outputs.iter().map(|o| o.eval(x)).collect()
    }

    /// Largest number of affine functions over the outputs.
    pub fn num_linear_fns(&self) -> usize {
        self.outputs.iter().map(|o| o.linear_fns.len()).max().unwrap_or(0)
    }

    /// Largest number of selector groups over the outputs.
    pub fn num_selector_groups(&self) -> usize {
        self.outputs.iter().map(|o| o.groups.len()).max().unwrap_or(0)
    }

    /// Multiply every affine map by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        for o in &mut out.outputs {
            for f in &mut o.linear_fns {
                f.w.iter_mut().for_each(|w| *w *= c);
                f.b *= c;
            }
        }
        out
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let net: Self = serde_json::from_str(s).map_err(|e| Error::InvalidInput(e.to_string()))?;
        net.validate()?;
        Ok(net)
    }
}

impl crate::Controller for TllNetwork {
    fn control(&self, x: &[f64]) -> Vec<f64> {
        self.eval(x)
    }
}

pub fn tll_eval(net: &TllNetwork, x: &[f64]) -> Vec<f64> {
    net.eval(x)
}
