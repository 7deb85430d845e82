//! Fixed-step RK4 closed-loop simulation.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::systems::{ControlSystem, PendulumParams};
use crate::{Controller, Error, Hyperbox, Result};

/// States are considered diverged beyond this multiple of the domain extent.
pub const DIVERGENCE_FACTOR: f64 = 1e3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub dt: f64,
    pub t: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    /// Control applied at each recorded state.
    pub u: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn last(&self) -> &[f64] {
        &self.x[self.x.len() - 1]
    }

    /// CSV with columns `t, x1..xn, u1..um`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let io = |e: csv::Error| Error::InvalidInput(format!("csv: {e}"));
        let mut wr = csv::Writer::from_writer(w);
        let n = self.x.first().map_or(0, Vec::len);
        let m = self.u.first().map_or(0, Vec::len);
        let header: Vec<String> = std::iter::once("t".to_string())
            .chain((1..=n).map(|i| format!("x{i}")))
            .chain((1..=m).map(|i| format!("u{i}")))
            .collect();
        wr.write_record(&header).map_err(io)?;
        for k in 0..self.len() {
            let row: Vec<String> = std::iter::once(self.t[k])
                .chain(self.x[k].iter().copied())
                .chain(self.u[k].iter().copied())
                .map(|v| format!("{v:?}"))
                .collect();
            wr.write_record(&row).map_err(io)?;
        }
        wr.flush().map_err(|e| Error::InvalidInput(format!("csv: {e}")))?;
        Ok(())
    }

    /// First recorded time after which every state stays inside `set`, if any.
    pub fn entry_time(&self, set: &Hyperbox) -> Option<f64> {
        let last_out = self.x.iter().rposition(|x| !set.contains(x));
        match last_out {
            None => Some(self.t[0]),
            Some(k) if k + 1 < self.len() => Some(self.t[k + 1]),
            _ => None,
        }
    }
}

fn axpy(x: &[f64], h: f64, k: &[f64]) -> Vec<f64> {
    x.iter().zip(k).map(|(a, b)| a + h * b).collect()
}

/// One classic RK4 step of `ẋ = f(x, ctrl(x))`.
pub fn rk4_step(sys: &dyn ControlSystem, ctrl: &dyn Controller, x: &[f64], dt: f64) -> Vec<f64> {
    let fld = |y: &[f64]| sys.field(y, &ctrl.control(y));
    let k1 = fld(x);
    let k2 = fld(&axpy(x, 0.5 * dt, &k1));
    let k3 = fld(&axpy(x, 0.5 * dt, &k2));
    let k4 = fld(&axpy(x, dt, &k3));
    (0..x.len()).map(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect()
}

/// Number of steps of size `dt` covering `horizon`; a ratio within rounding
/// of an integer counts as that integer.
pub fn step_count(horizon: f64, dt: f64) -> usize {
    let r = horizon / dt;
    let nearest = r.round();
    if (r - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest as usize
    } else {
        r.ceil() as usize
    }
}

/// Integrate the closed loop from `x0` over `[0, horizon]` with step `dt`.
pub fn simulate(sys: &dyn ControlSystem, ctrl: &dyn Controller, x0: &[f64], horizon: f64, dt: f64) -> Result<Trajectory> {
    if !(dt > 0.0 && dt.is_finite() && horizon.is_finite() && horizon >= dt) {
        return Err(Error::InvalidInput(format!("need 0 < dt ≤ horizon, got dt = {dt}, horizon = {horizon}")));
    }
    if x0.len() != sys.state_dim() {
        return Err(Error::InvalidInput("initial state dimension".into()));
    }
    let limit = DIVERGENCE_FACTOR * sys.domain().extent();
    let steps = step_count(horizon, dt);
    let mut traj = Trajectory {
        dt,
        t: Vec::with_capacity(steps + 1),
        x: Vec::with_capacity(steps + 1),
        u: Vec::with_capacity(steps + 1),
    };
    let mut x = x0.to_vec();
    for k in 0..=steps {
        let t = k as f64 * dt;
        let norm = x.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if !(norm <= limit) {
            return Err(Error::Diverged { t, norm });
        }
        traj.t.push(t);
        traj.u.push(ctrl.control(&x));
        traj.x.push(x.clone());
        if k < steps {
            x = rk4_step(sys, ctrl, &x, dt);
        }
    }
    Ok(traj)
}

/// Feedback-linearizing PD law for the pendulum, saturated into `U`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertController {
    pub params: PendulumParams,
    pub gains: (f64, f64),
    pub control_box: Hyperbox,
}

impl ExpertController {
    pub fn new(params: PendulumParams, gains: (f64, f64), control_box: Hyperbox) -> Self {
        Self { params, gains, control_box }
    }

    pub fn pendulum_default() -> Self {
        Self::new(PendulumParams::default(), (4.0, 4.0), Hyperbox::cube(1, -6.0, 6.0).expect("valid box"))
    }
}

impl Controller for ExpertController {
    fn control(&self, x: &[f64]) -> Vec<f64> {
        let p = &self.params;
        let (k1, k2) = self.gains;
        let v = -(p.gravity / p.length) * x[0].sin() + p.friction / (p.mass * p.length * p.length) * x[1]
            - k1 * x[0]
            - k2 * x[1];
        let u = p.mass * p.length / x[0].cos() * v;
        self.control_box.clamp(&[u])
    }
}

pub fn expert_controller(params: PendulumParams, gains: (f64, f64)) -> ExpertController {
    ExpertController::new(params, gains, Hyperbox::cube(1, -6.0, 6.0).expect("valid box"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{FnSystem, Pendulum};

    fn decay() -> FnSystem<impl Fn(&[f64], &[f64]) -> Vec<f64> + Sync> {
        FnSystem {
            domain: Hyperbox::cube(1, -1.0, 1.0).unwrap(),
            control_box: Hyperbox::cube(1, -1.0, 1.0).unwrap(),
            f: |x: &[f64], _u: &[f64]| vec![-x[0]],
        }
    }

    fn zero_ctrl(_: &[f64]) -> Vec<f64> {
        vec![0.0]
    }

    #[test]
    fn zero_field_is_constant() {
        let sys = FnSystem {
            domain: Hyperbox::cube(2, -1.0, 1.0).unwrap(),
            control_box: Hyperbox::cube(1, -1.0, 1.0).unwrap(),
            f: |_x: &[f64], _u: &[f64]| vec![0.0, 0.0],
        };
        let tr = simulate(&sys, &zero_ctrl, &[0.3, -0.2], 1.0, 0.1).unwrap();
        assert_eq!(tr.len(), 11);
        assert!(tr.x.iter().all(|x| x == &vec![0.3, -0.2]));
    }

    #[test]
    fn exponential_decay() {
        let tr = simulate(&decay(), &zero_ctrl, &[1.0], 1.0, 1e-3).unwrap();
        assert_eq!(tr.len(), 1001);
        assert!((tr.last()[0] - (-1f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn rk4_order() {
        let err = |dt: f64| (simulate(&decay(), &zero_ctrl, &[1.0], 1.0, dt).unwrap().last()[0] - (-1f64).exp()).abs();
        let factor = err(0.1) / err(0.05);
        assert!((12.0..=20.0).contains(&factor), "{factor}");
    }

    #[test]
    fn divergence_detected() {
        let sys = FnSystem {
            domain: Hyperbox::cube(1, -1.0, 1.0).unwrap(),
            control_box: Hyperbox::cube(1, -1.0, 1.0).unwrap(),
            f: |x: &[f64], _u: &[f64]| vec![x[0] * x[0]],
        };
        assert!(matches!(simulate(&sys, &zero_ctrl, &[1.0], 5.0, 1e-3), Err(Error::Diverged { .. })));
        assert!(simulate(&sys, &zero_ctrl, &[1.0], 0.0, 1e-3).is_err());
    }

    #[test]
    fn expert_stabilizes_pendulum() {
        let ctrl = ExpertController::pendulum_default();
        assert_eq!(ctrl.control(&[0.0, 0.0]), vec![0.0]);
        let tr = simulate(&Pendulum::default(), &ctrl, &[0.7, 0.5], 10.0, 1e-3).unwrap();
        let spec = Hyperbox::new(vec![-1.0, -0.5], vec![1.0, 0.5]).unwrap();
        assert!(tr.entry_time(&spec).is_some());
        let norms: Vec<f64> = tr.x.iter().map(|x| x[0].abs().max(x[1].abs())).collect();
        // after the transient the sup-norm decreases monotonically
        let start = 2000;
        assert!(norms[start..].windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert!(norms[norms.len() - 1] < 1e-3);
        assert!(tr.u.iter().all(|u| u[0].abs() <= 6.0));
    }

    #[test]
    fn csv_export() {
        let tr = simulate(&decay(), &zero_ctrl, &[1.0], 0.2, 0.1).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "t,x1,u1");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("0.0,1.0,0.0"));
    }

    #[test]
    fn step_count_snaps() {
        assert_eq!(step_count(1.0, 0.1), 10);
        assert_eq!(step_count(1.0, 0.3), 4);
        assert_eq!(step_count(0.0098, 0.000098), 100);
    }
}
