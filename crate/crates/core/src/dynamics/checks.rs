//! Closed-loop deviation and `(δ, τ)` invariance checks.

use serde::{Deserialize, Serialize};

use super::sim::simulate;
use super::systems::ControlSystem;
use crate::sampling::Halton;
use crate::{sup_dist, Controller, Exec, Hyperbox, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationReport {
    /// `max ‖ζ_Υ(τ) − ζ_Ψ(τ)‖_∞` over the initial states.
    pub max_deviation: f64,
    pub worst_initial_state: Vec<f64>,
    /// `max ‖Υ(x) − Ψ(x)‖_∞` along the `Υ` trajectories.
    pub max_control_gap: f64,
    pub samples: usize,
}

/// Simulate both closed loops from every initial state up to `tau` and
/// compare their endpoints.
pub fn deviation_check(
    sys: &dyn ControlSystem,
    psi: &dyn Controller,
    upsilon: &dyn Controller,
    tau: f64,
    inits: &[Vec<f64>],
    dt: f64,
    exec: Exec,
) -> Result<DeviationReport> {
    let runs = exec.map(inits.len(), |i| -> Result<(f64, f64)> {
        let a = simulate(sys, psi, &inits[i], tau, dt)?;
        let b = simulate(sys, upsilon, &inits[i], tau, dt)?;
        let gap = b
            .x
            .iter()
            .map(|x| sup_dist(&upsilon.control(x), &psi.control(x)))
            .fold(0.0, f64::max);
        Ok((sup_dist(a.last(), b.last()), gap))
    });
    let mut report = DeviationReport { max_deviation: 0.0, worst_initial_state: Vec::new(), max_control_gap: 0.0, samples: inits.len() };
    for (i, r) in runs.into_iter().enumerate() {
        let (dev, gap) = r?;
        if dev > report.max_deviation || report.worst_initial_state.is_empty() {
            report.max_deviation = report.max_deviation.max(dev);
            report.worst_initial_state = inits[i].clone();
        }
        report.max_control_gap = report.max_control_gap.max(gap);
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Offender {
    pub initial_state: Vec<f64>,
    pub state: Vec<f64>,
    pub time: f64,
    /// Sup-norm depth inside `X` minus `δ`; negative means in `edge_δ(X)`
    /// or outside `X`.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub delta: f64,
    pub tau: f64,
    pub edge_samples: usize,
    pub interior_samples: usize,
    /// Every edge start lands outside `edge_δ(X)` after `τ`.
    pub edge_leaves: bool,
    /// Every interior start stays interior at all multiples of `τ` in the horizon.
    pub interior_stays: bool,
    pub verdict: bool,
    pub worst: Option<Offender>,
}

fn margin(domain: &Hyperbox, x: &[f64], delta: f64) -> f64 {
    let depth = (0..x.len())
        .map(|k| (x[k] - domain.lower[k]).min(domain.upper[k] - x[k]))
        .fold(f64::INFINITY, f64::min);
    depth - delta
}

/// Point of `edge_δ(X)`: a Halton point with one coordinate pushed to within
/// `δ` of a face, cycling through the faces.
fn edge_point(domain: &Hyperbox, seq: &Halton, delta: f64, i: usize) -> Vec<f64> {
    let n = domain.dim();
    let s = seq.unit(i);
    let mut x = domain.from_unit(&s);
    let face = i % (2 * n);
    let (k, upper) = (face / 2, face % 2 == 1);
    let depth = s[k] * delta;
    x[k] = if upper { domain.upper[k] - depth } else { domain.lower[k] + depth };
    x
}

/// Sample starts in `edge_δ(X)` and in its complement and test the `τ`-step
/// invariance property: edge starts must leave the edge within one period,
/// interior starts must stay interior at each of `periods` multiples of `τ`.
#[allow(clippy::too_many_arguments)]
pub fn invariance_check(
    sys: &dyn ControlSystem,
    ctrl: &dyn Controller,
    delta: f64,
    tau: f64,
    samples: usize,
    periods: usize,
    dt: f64,
    seed: u64,
    exec: Exec,
) -> Result<InvarianceReport> {
    let domain = sys.domain();
    let n = domain.dim();
    if !(delta > 0.0 && 2.0 * delta < domain.extent()) {
        return Err(crate::Error::InvalidInput(format!("need 0 < δ < ext(X)/2, got {delta}")));
    }
    let inner = Hyperbox::new(
        domain.lower.iter().map(|l| l + delta).collect(),
        domain.upper.iter().map(|u| u - delta).collect(),
    )
    .ok();
    let seq = Halton::new(n, seed);
    let periods = periods.max(1);
    let steps_per_period = super::sim::step_count(tau, dt).max(1);
    let dt = tau / steps_per_period as f64;

    let edge = exec.map(samples, |i| -> Result<Offender> {
        let x0 = edge_point(domain, &seq, delta, i);
        let tr = simulate(sys, ctrl, &x0, tau, dt)?;
        let x = tr.last().to_vec();
        Ok(Offender { margin: margin(domain, &x, delta), initial_state: x0, state: x, time: tau })
    });
    let interior_count = if inner.as_ref().is_some_and(|b| (0..n).all(|k| b.width(k) > 0.0)) { samples } else { 0 };
    let interior = exec.map(interior_count, |i| -> Result<Offender> {
        let x0 = inner.as_ref().expect("inner box").from_unit(&seq.unit(samples + i));
        let tr = simulate(sys, ctrl, &x0, tau * periods as f64, dt)?;
        let worst = (1..=periods)
            .map(|p| {
                let x = &tr.x[(p * steps_per_period).min(tr.len() - 1)];
                (margin(domain, x, delta), p, x.clone())
            })
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .expect("at least one period");
        Ok(Offender { initial_state: x0, state: worst.2, time: worst.1 as f64 * tau, margin: worst.0 })
    });
    let edge: Vec<Offender> = edge.into_iter().collect::<Result<_>>()?;
    let interior: Vec<Offender> = interior.into_iter().collect::<Result<_>>()?;
    let edge_leaves = edge.iter().all(|o| o.margin > 0.0);
    let interior_stays = interior.iter().all(|o| o.margin > 0.0);
    let worst = edge.iter().chain(&interior).min_by(|a, b| a.margin.total_cmp(&b.margin)).cloned();
    Ok(InvarianceReport {
        delta,
        tau,
        edge_samples: edge.len(),
        interior_samples: interior.len(),
        edge_leaves,
        interior_stays,
        verdict: edge_leaves && interior_stays,
        worst,
    })
}
