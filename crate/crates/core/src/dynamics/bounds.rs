//! Lipschitz and vector-field bound estimation.

use serde::{Deserialize, Serialize};

use super::systems::{ControlSystem, Jacobian, PendulumParams};
use crate::sampling::grid_points;
use crate::sizing::SystemBounds;
use crate::{Controller, Error, Exec, Hyperbox, Result};

/// Central-difference step for numeric Jacobians.
pub const FD_STEP: f64 = 1e-6;

/// Default inflation of the sampled vector-field sup.
pub const DEFAULT_SAFETY: f64 = 1.1;

/// Plant constants estimated by sampling (or bounded analytically).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantBounds {
    pub k_x: f64,
    pub k_u: f64,
    /// Vector-field bound after the safety factor.
    pub k_vf: f64,
    /// Largest sampled `‖f‖_∞` before inflation.
    pub k_vf_sampled: f64,
    pub safety: f64,
    pub samples: usize,
    pub method: String,
}

impl PlantBounds {
    /// Attach the controller budget and the margin.
    pub fn system_bounds(&self, k_cont: f64, delta: f64) -> Result<SystemBounds> {
        SystemBounds::new(self.k_x, self.k_u, self.k_vf, k_cont, delta)
    }
}

fn numeric_jacobian(sys: &dyn ControlSystem, x: &[f64], u: &[f64]) -> Jacobian {
    let n = x.len();
    let m = u.len();
    let mut jx = vec![vec![0.0; n]; n];
    let mut ju = vec![vec![0.0; m]; n];
    let mut xp = x.to_vec();
    for j in 0..n {
        xp[j] = x[j] + FD_STEP;
        let fp = sys.field(&xp, u);
        xp[j] = x[j] - FD_STEP;
        let fm = sys.field(&xp, u);
        xp[j] = x[j];
        for i in 0..n {
            jx[i][j] = (fp[i] - fm[i]) / (2.0 * FD_STEP);
        }
    }
    let mut up = u.to_vec();
    for j in 0..m {
        up[j] = u[j] + FD_STEP;
        let fp = sys.field(x, &up);
        up[j] = u[j] - FD_STEP;
        let fm = sys.field(x, &up);
        up[j] = u[j];
        for i in 0..n {
            ju[i][j] = (fp[i] - fm[i]) / (2.0 * FD_STEP);
        }
    }
    (jx, ju)
}

fn row_sum_norm(a: &[Vec<f64>]) -> f64 {
    a.iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Sample `X × U` on a grid with `grid_per_axis` points per axis (endpoints
/// included). `K_x`, `K_u` are the largest induced ∞-norms of the state and
/// input Jacobians, `K_vf` the largest `‖f‖_∞` times `safety`.
pub fn estimate_bounds(sys: &dyn ControlSystem, grid_per_axis: usize, safety: f64, exec: Exec) -> Result<PlantBounds> {
    if grid_per_axis < 2 {
        return Err(Error::InvalidInput("grid_per_axis must be at least 2".into()));
    }
    if !(safety.is_finite() && safety >= 1.0) {
        return Err(Error::InvalidInput(format!("safety factor must be ≥ 1, got {safety}")));
    }
    let (x_box, u_box) = (sys.domain(), sys.control_box());
    let n = x_box.dim();
    let joint = Hyperbox::new(
        x_box.lower.iter().chain(&u_box.lower).copied().collect(),
        x_box.upper.iter().chain(&u_box.upper).copied().collect(),
    )?;
    let points = grid_points(&joint, grid_per_axis);
    let analytic = sys.jacobian(&points[0][..n], &points[0][n..]).is_some();
    let per_point = exec.map(points.len(), |i| {
        let (x, u) = points[i].split_at(n);
        let f = sys.field(x, u);
        let (jx, ju) = sys.jacobian(x, u).unwrap_or_else(|| numeric_jacobian(sys, x, u));
        let vals = [f.iter().map(|v| v.abs()).fold(0.0, f64::max), row_sum_norm(&jx), row_sum_norm(&ju)];
        let finite = f.iter().chain(jx.iter().flatten()).chain(ju.iter().flatten()).all(|v| v.is_finite());
        (vals, finite, i)
    });
    let mut best = [0.0f64; 3];
    for (vals, finite, i) in per_point {
        if !finite {
            return Err(Error::NonFinite(format!("vector field or Jacobian at {:?}", points[i])));
        }
        for k in 0..3 {
            best[k] = best[k].max(vals[k]);
        }
    }
    Ok(PlantBounds {
        k_x: best[1],
        k_u: best[2],
        k_vf: best[0] * safety,
        k_vf_sampled: best[0],
        safety,
        samples: points.len(),
        method: if analytic { "grid, analytic Jacobian" } else { "grid, central differences" }.into(),
    })
}

/// Coarse bounds for the pendulum using `|sin|, |cos| ≤ 1` over the boxes.
pub fn pendulum_interval_bounds(p: &PendulumParams, domain: &Hyperbox, control_box: &Hyperbox) -> PlantBounds {
    let x2 = domain.lower[1].abs().max(domain.upper[1].abs());
    let u = control_box.lower[0].abs().max(control_box.upper[0].abs());
    let g_l = p.gravity / p.length;
    let damp = p.friction / (p.mass * p.length * p.length);
    let gain = 1.0 / (p.mass * p.length);
    PlantBounds {
        k_x: (g_l + gain * u + damp).max(1.0),
        k_u: gain,
        k_vf: (g_l + damp * x2 + gain * u).max(x2),
        k_vf_sampled: f64::NAN,
        safety: 1.0,
        samples: 0,
        method: "interval".into(),
    }
}

/// Largest induced ∞-norm of the controller's Jacobian over a grid on
/// `domain`, by central differences with step `h`. Kinks (saturation) are
/// straddled by the stencil, so the estimate is a sampled lower bound of the
/// true constant.
pub fn measure_lipschitz(ctrl: &dyn Controller, domain: &Hyperbox, grid_per_axis: usize, h: f64, exec: Exec) -> f64 {
    let points = grid_points(domain, grid_per_axis);
    exec.max(points.len(), |i| {
        let x = &points[i];
        let mut xp = x.clone();
        let mut rows: Vec<f64> = Vec::new();
        for j in 0..x.len() {
            xp[j] = x[j] + h;
            let up = ctrl.control(&xp);
            xp[j] = x[j] - h;
            let um = ctrl.control(&xp);
            xp[j] = x[j];
            if rows.is_empty() {
                rows = vec![0.0; up.len()];
            }
            for (r, (a, b)) in rows.iter_mut().zip(up.iter().zip(&um)) {
                *r += ((a - b) / (2.0 * h)).abs();
            }
        }
        rows.into_iter().fold(0.0, f64::max)
    })
}
