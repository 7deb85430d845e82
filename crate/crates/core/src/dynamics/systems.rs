//! Plant models.

use serde::{Deserialize, Serialize};

use crate::{Error, Hyperbox, Result};

/// State and input Jacobians, row-major: `∂f/∂x` is `n × n`, `∂f/∂u` is `n × m`.
pub type Jacobian = (Vec<Vec<f64>>, Vec<Vec<f64>>);

/// A continuous-time control system `ẋ = f(x, u)` on `X × U`.
pub trait ControlSystem: Sync {
    fn domain(&self) -> &Hyperbox;
    fn control_box(&self) -> &Hyperbox;
    fn field(&self, x: &[f64], u: &[f64]) -> Vec<f64>;

    fn jacobian(&self, _x: &[f64], _u: &[f64]) -> Option<Jacobian> {
        None
    }

    fn state_dim(&self) -> usize {
        self.domain().dim()
    }

    fn control_dim(&self) -> usize {
        self.control_box().dim()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PendulumParams {
    /// Mass (kg).
    pub mass: f64,
    /// Length (m).
    pub length: f64,
    /// Friction coefficient.
    pub friction: f64,
    /// Gravity (N/kg).
    pub gravity: f64,
}

impl Default for PendulumParams {
    fn default() -> Self {
        Self { mass: 0.5, length: 0.5, friction: 2.0, gravity: 9.8 }
    }
}

impl PendulumParams {
    pub fn validate(&self) -> Result<()> {
        let all = [self.mass, self.length, self.friction, self.gravity];
        if all.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("pendulum parameters must be positive: {self:?}")))
        }
    }

    fn g_over_l(&self) -> f64 {
        self.gravity / self.length
    }

    fn damping(&self) -> f64 {
        self.friction / (self.mass * self.length * self.length)
    }

    fn gain(&self) -> f64 {
        1.0 / (self.mass * self.length)
    }
}

/// Inverted pendulum vector field with angle `x₁` measured from upright.
pub fn pendulum_field(p: &PendulumParams, x: &[f64], u: &[f64]) -> Vec<f64> {
    vec![x[1], p.g_over_l() * x[0].sin() - p.damping() * x[1] + p.gain() * x[0].cos() * u[0]]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pendulum {
    pub params: PendulumParams,
    pub domain: Hyperbox,
    pub control_box: Hyperbox,
}

impl Default for Pendulum {
    fn default() -> Self {
        Self {
            params: PendulumParams::default(),
            domain: Hyperbox::cube(2, -1.0, 1.0).expect("valid box"),
            control_box: Hyperbox::cube(1, -6.0, 6.0).expect("valid box"),
        }
    }
}

impl Pendulum {
    pub fn new(params: PendulumParams, domain: Hyperbox, control_box: Hyperbox) -> Result<Self> {
        params.validate()?;
        if domain.dim() != 2 || control_box.dim() != 1 {
            return Err(Error::InvalidInput("pendulum needs a 2-D state box and 1-D control box".into()));
        }
        domain.validate()?;
        control_box.validate()?;
        Ok(Self { params, domain, control_box })
    }
}

impl ControlSystem for Pendulum {
    fn domain(&self) -> &Hyperbox {
        &self.domain
    }

    fn control_box(&self) -> &Hyperbox {
        &self.control_box
    }

    fn field(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        pendulum_field(&self.params, x, u)
    }

    fn jacobian(&self, x: &[f64], u: &[f64]) -> Option<Jacobian> {
        let p = &self.params;
        let (s, c) = x[0].sin_cos();
        let jx = vec![vec![0.0, 1.0], vec![p.g_over_l() * c - p.gain() * s * u[0], -p.damping()]];
        let ju = vec![vec![0.0], vec![p.gain() * c]];
        Some((jx, ju))
    }
}

/// `ẋ = A x + B u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSystem {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub domain: Hyperbox,
    pub control_box: Hyperbox,
}

impl LinearSystem {
    pub fn new(a: Vec<Vec<f64>>, b: Vec<Vec<f64>>, domain: Hyperbox, control_box: Hyperbox) -> Result<Self> {
        let (n, m) = (domain.dim(), control_box.dim());
        if a.len() != n || b.len() != n || a.iter().any(|r| r.len() != n) || b.iter().any(|r| r.len() != m) {
            return Err(Error::InvalidInput("A must be n×n and B n×m".into()));
        }
        Ok(Self { a, b, domain, control_box })
    }
}

fn matvec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter().map(|r| r.iter().zip(x).map(|(p, q)| p * q).sum()).collect()
}

impl ControlSystem for LinearSystem {
    fn domain(&self) -> &Hyperbox {
        &self.domain
    }

    fn control_box(&self) -> &Hyperbox {
        &self.control_box
    }

    fn field(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        matvec(&self.a, x).iter().zip(matvec(&self.b, u)).map(|(p, q)| p + q).collect()
    }

    fn jacobian(&self, _x: &[f64], _u: &[f64]) -> Option<Jacobian> {
        Some((self.a.clone(), self.b.clone()))
    }
}

/// A system given by a closure, differentiated numerically.
pub struct FnSystem<F> {
    pub domain: Hyperbox,
    pub control_box: Hyperbox,
    pub f: F,
}

impl<F> ControlSystem for FnSystem<F>
where
    F: Fn(&[f64], &[f64]) -> Vec<f64> + Sync,
{
    fn domain(&self) -> &Hyperbox {
        &self.domain
    }

    fn control_box(&self) -> &Hyperbox {
        &self.control_box
    }

    fn field(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        (self.f)(x, u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pendulum_field_examples() {
        let p = PendulumParams::default();
        assert_eq!(pendulum_field(&p, &[0.0, 0.0], &[0.0]), vec![0.0, 0.0]);
        assert_eq!(pendulum_field(&p, &[0.0, 1.0], &[0.0]), vec![1.0, -16.0]);
        let f = pendulum_field(&p, &[1.0, 0.0], &[6.0]);
        let expected = 19.6 * 1f64.sin() + 4.0 * 1f64.cos() * 6.0;
        assert_eq!(f[0], 0.0);
        assert!((f[1] - expected).abs() < 1e-12);
        assert!((f[1] - (19.6 * 0.84147 + 24.0 * 0.54030)).abs() < 1e-3);
    }

    #[test]
    fn pendulum_jacobian_matches_differences() {
        let sys = Pendulum::default();
        let (x, u) = ([0.4, -0.3], [2.5]);
        let (jx, ju) = sys.jacobian(&x, &u).unwrap();
        let h = 1e-6;
        for j in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[j] += h;
            xm[j] -= h;
            let (fp, fm) = (sys.field(&xp, &u), sys.field(&xm, &u));
            for i in 0..2 {
                assert!((jx[i][j] - (fp[i] - fm[i]) / (2.0 * h)).abs() < 1e-6);
            }
        }
        let (fp, fm) = (sys.field(&x, &[u[0] + h]), sys.field(&x, &[u[0] - h]));
        assert!((ju[1][0] - (fp[1] - fm[1]) / (2.0 * h)).abs() < 1e-6);
    }

    #[test]
    fn invalid_params() {
        let p = PendulumParams { mass: 0.0, ..Default::default() };
        assert!(Pendulum::new(p, Hyperbox::cube(2, -1.0, 1.0).unwrap(), Hyperbox::cube(1, -6.0, 6.0).unwrap()).is_err());
        assert!(LinearSystem::new(vec![vec![1.0]], vec![], Hyperbox::cube(1, -1.0, 1.0).unwrap(), Hyperbox::cube(1, -1.0, 1.0).unwrap()).is_err());
    }
}
