//! Architecture sizing and constructive synthesis of two-level lattice (TLL)
//! ReLU controllers for Lipschitz control systems.
//!
//! The crate is organized bottom-up:
//! - [`sizing`]: closed-form accuracy, sampling period, grid pitch and region
//!   count for a TLL architecture that is guaranteed to be large enough.
//! - [`cpwa`]: the grid-based continuous piecewise-affine approximation of a
//!   controller (plateaus plus recursive corner interpolation).
//! - [`tll`]: min-of-max lattice realization of a CPWA and its lowering to a
//!   plain layered ReLU network.
//! - [`dynamics`]: plant models, Lipschitz bound estimation, RK4 closed-loop
//!   simulation and the deviation/invariance checks.
//! - [`simrel`]: finite metric transition systems, perturbation and the
//!   abstract-disturbance simulation checker.
//!
//! Data-parallel sweeps go through [`Exec`]; with the `parallel` feature
//! disabled every sweep runs sequentially.

pub mod cpwa;
pub mod dynamics;
mod error;
mod exec;
mod geometry;
mod linalg;
pub mod sampling;
pub mod simrel;
pub mod sizing;
pub mod tll;

pub use error::{Error, Result};
pub use exec::Exec;
pub use geometry::Hyperbox;

/// A state-feedback law `x ↦ u`.
pub trait Controller: Sync {
    fn control(&self, x: &[f64]) -> Vec<f64>;
}

impl<F> Controller for F
where
    F: Fn(&[f64]) -> Vec<f64> + Sync,
{
    fn control(&self, x: &[f64]) -> Vec<f64> {
        self(x)
    }
}

/// Sup-norm distance between two points of equal dimension.
pub fn sup_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
