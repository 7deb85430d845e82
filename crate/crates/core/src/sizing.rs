//! Closed-form sizing of a TLL controller architecture from Lipschitz data.
//!
//! Given the plant constants `K_x`, `K_u`, the vector-field bound `K_vf`, the
//! controller Lipschitz budget `K_cont` and a robustness margin `δ`, the chain
//! is: accuracy `μ` (largest value with `g(μ) < δ`), sampling period `τ`,
//! grid pitch `η`, and finally the number of affine pieces `N` that any
//! `K_cont`-Lipschitz controller needs after grid approximation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::tll::{arch_of_bound, ArchDescriptor};
use crate::{Error, Hyperbox, Result};

/// Relative bisection tolerance for [`solve_mu`].
pub const MU_REL_TOL: f64 = 1e-10;

/// Maximum number of bracket doublings before [`solve_mu`] gives up.
const MAX_DOUBLINGS: u32 = 1100;

/// Plant and controller Lipschitz data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzBounds {
    /// State Lipschitz constant of the vector field.
    pub k_x: f64,
    /// Input Lipschitz constant of the vector field.
    pub k_u: f64,
    /// Sup-norm bound of the vector field over `X × U`.
    pub k_vf: f64,
    /// Lipschitz budget of the (unknown) controller being approximated.
    pub k_cont: f64,
}

/// [`LipschitzBounds`] together with the robustness margin `δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemBounds {
    #[serde(flatten)]
    pub lipschitz: LipschitzBounds,
    pub delta: f64,
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{name} must be positive and finite, got {v}")))
    }
}

impl LipschitzBounds {
    pub fn validate(&self) -> Result<()> {
        check_positive("K_x", self.k_x)?;
        check_positive("K_u", self.k_u)?;
        check_positive("K_vf", self.k_vf)?;
        check_positive("K_cont", self.k_cont)
    }

    fn tau_scale(&self) -> f64 {
        6.0 * self.k_cont * self.k_vf
    }

    /// `g(μ) = K_u·μ·τ(μ)·exp(K_x·τ(μ))` with `τ(μ) = μ/(6·K_cont·K_vf)`: the
    /// state deviation bound after one sampling period when the control error
    /// is at most `μ`. Strictly increasing on `(0, ∞)`.
    pub fn required_margin(&self, mu: f64) -> f64 {
        let tau = mu / self.tau_scale();
        self.k_u * mu * tau * (self.k_x * tau).exp()
    }
}

impl SystemBounds {
    pub fn new(k_x: f64, k_u: f64, k_vf: f64, k_cont: f64, delta: f64) -> Result<Self> {
        let b = Self {
            lipschitz: LipschitzBounds { k_x, k_u, k_vf, k_cont },
            delta,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        self.lipschitz.validate()?;
        check_positive("delta", self.delta)
    }
}

/// Largest accuracy `μ` with `g(μ) < δ`, found by geometric bracketing and
/// bisection. The returned value is the lower end of the final bracket, so
/// the strict inequality holds for it.
pub fn solve_mu(bounds: &SystemBounds) -> Result<f64> {
    bounds.validate()?;
    let lip = &bounds.lipschitz;
    let delta = bounds.delta;

    let mut hi = delta * lip.tau_scale() / lip.k_u;
    let mut doublings = 0;
    loop {
        let g = lip.required_margin(hi);
        if g.is_nan() || !hi.is_finite() {
            return Err(Error::NonFinite(format!(
                "g(mu) not finite while bracketing at mu = {hi:e} after {doublings} doublings"
            )));
        }
        if g >= delta {
            break;
        }
        if doublings == MAX_DOUBLINGS {
            return Err(Error::NonFinite(format!(
                "bracketing cap reached: g({hi:e}) = {g:e} still below delta after {MAX_DOUBLINGS} doublings"
            )));
        }
        hi *= 2.0;
        doublings += 1;
    }

    let mut lo = 0.0;
    while hi - lo > MU_REL_TOL * hi {
        let mid = 0.5 * (lo + hi);
        if lip.required_margin(mid) < delta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if lo <= 0.0 {
        return Err(Error::NonFinite("bisection collapsed to mu = 0".into()));
    }
    Ok(lo)
}

/// Largest admissible sampling period and grid pitch for accuracy `μ`:
/// `τ = μ/(6·K_cont·K_vf)`, `η = μ/(6·K_cont)`.
pub fn derive_tau_eta(mu: f64, bounds: &LipschitzBounds) -> Result<(f64, f64)> {
    bounds.validate()?;
    if !(mu.is_finite() && mu >= 0.0) {
        return Err(Error::InvalidInput(format!("mu must be finite and non-negative, got {mu}")));
    }
    Ok((mu / bounds.tau_scale(), mu / (6.0 * bounds.k_cont)))
}

/// How the real-valued region bound is turned into an integer.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rounding {
    #[default]
    Ceil,
    Round,
    Floor,
}

impl std::str::FromStr for Rounding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ceil" => Ok(Self::Ceil),
            "round" => Ok(Self::Round),
            "floor" => Ok(Self::Floor),
            other => Err(Error::InvalidInput(format!("unknown rounding mode '{other}'"))),
        }
    }
}

/// `Σ_{k=1}^{n} n!/(n−k)! · 2^{2k−1}`, which equals `n!·Σ 2^{2k−1}/(n−k)!`,
/// computed exactly.
pub fn region_factor(n: usize) -> Result<u128> {
    let overflow = || Error::Overflow(format!("region factor for n = {n}"));
    let mut total: u128 = 0;
    let mut falling: u128 = 1; // n!/(n-k)!
    for k in 1..=n {
        falling = falling.checked_mul((n - k + 1) as u128).ok_or_else(overflow)?;
        let pow = 1u128.checked_shl((2 * k - 1) as u32).filter(|_| 2 * k - 1 < 128).ok_or_else(overflow)?;
        total = total
            .checked_add(falling.checked_mul(pow).ok_or_else(overflow)?)
            .ok_or_else(overflow)?;
    }
    Ok(total)
}

/// Real-valued region bound `m · region_factor(n) · (ext/η)ⁿ`.
pub fn region_bound_real(n: usize, m: usize, ext: f64, eta: f64) -> Result<f64> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidInput("n and m must be at least 1".into()));
    }
    if !(ext.is_finite() && ext > 0.0 && eta.is_finite() && eta > 0.0) {
        return Err(Error::InvalidInput(format!("need ext > 0 and eta > 0, got {ext}, {eta}")));
    }
    let factor = region_factor(n)?;
    Ok(m as f64 * factor as f64 * (ext / eta).powi(n as i32))
}

/// Integer upper bound on the number of linear regions of the grid CPWA
/// approximation. Values within `1e-9` (relative) of an integer snap to it
/// before `rounding` applies, so exact pitches such as `η = 1/3` are not
/// pushed up by floating-point noise.
pub fn region_bound(n: usize, m: usize, ext: f64, eta: f64, rounding: Rounding) -> Result<u64> {
    let v = region_bound_real(n, m, ext, eta)?;
    let nearest = v.round();
    let r = if (v - nearest).abs() <= 1e-9 * v.max(1.0) {
        nearest
    } else {
        match rounding {
            Rounding::Ceil => v.ceil(),
            Rounding::Round => nearest,
            Rounding::Floor => v.floor(),
        }
    };
    if !r.is_finite() || r >= u64::MAX as f64 {
        return Err(Error::Overflow(format!("region bound {v:e} exceeds u64")));
    }
    Ok(r as u64)
}

/// Grönwall deviation bound `K_u·κ·t·exp(K_x·t)`.
pub fn gronwall_bound(kappa: f64, t: f64, k_x: f64, k_u: f64) -> f64 {
    k_u * kappa * t * (k_x * t).exp()
}

/// Everything the sizing chain computes, with the formula behind each value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizingReport {
    pub bounds: LipschitzBounds,
    /// Requested margin; `None` when `μ` was fixed directly.
    pub delta: Option<f64>,
    pub mu: f64,
    pub mu_source: String,
    /// `g(μ)`: the margin this `μ` actually needs.
    pub delta_required: f64,
    pub tau: f64,
    pub eta: f64,
    pub n: usize,
    pub m: usize,
    pub extent: f64,
    pub region_bound_real: f64,
    pub rounding: Rounding,
    pub region_bound: u64,
    pub arch: ArchDescriptor,
    pub formulas: BTreeMap<String, String>,
}

fn formulas() -> BTreeMap<String, String> {
    [
        ("mu", "largest mu with K_u*mu*tau(mu)*exp(K_x*tau(mu)) < delta"),
        ("delta_required", "K_u*mu*tau*exp(K_x*tau)"),
        ("tau", "mu/(6*K_cont*K_vf)"),
        ("eta", "mu/(6*K_cont)"),
        ("extent", "max_k (upper_k - lower_k)"),
        ("region_bound", "m * n! * sum_{k=1..n} 2^(2k-1)/(n-k)! * (extent/eta)^n"),
        ("arch", "lattice lowering with pairwise max/min gadgets, worst case N groups of N"),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect()
}

fn assemble(
    lip: &LipschitzBounds,
    delta: Option<f64>,
    mu: f64,
    mu_source: &str,
    domain: &Hyperbox,
    m: usize,
    rounding: Rounding,
) -> Result<SizingReport> {
    domain.validate()?;
    let n = domain.dim();
    let (tau, eta) = derive_tau_eta(mu, lip)?;
    let extent = domain.extent();
    let region_real = region_bound_real(n, m, extent, eta)?;
    let region = region_bound(n, m, extent, eta, rounding)?;
    let arch = arch_of_bound(region.max(1), n, m)?;
    Ok(SizingReport {
        bounds: *lip,
        delta,
        mu,
        mu_source: mu_source.to_string(),
        delta_required: lip.required_margin(mu),
        tau,
        eta,
        n,
        m,
        extent,
        region_bound_real: region_real,
        rounding,
        region_bound: region,
        arch,
        formulas: formulas(),
    })
}

/// Full sizing chain driven by the margin `δ`.
pub fn size_report(
    bounds: &SystemBounds,
    domain: &Hyperbox,
    m: usize,
    rounding: Rounding,
) -> Result<SizingReport> {
    let mu = solve_mu(bounds)?;
    assemble(&bounds.lipschitz, Some(bounds.delta), mu, "solved", domain, m, rounding)
}

/// Sizing chain with the accuracy `μ` fixed directly.
pub fn size_report_for_mu(
    bounds: &LipschitzBounds,
    mu: f64,
    domain: &Hyperbox,
    m: usize,
    rounding: Rounding,
) -> Result<SizingReport> {
    bounds.validate()?;
    check_positive("mu", mu)?;
    assemble(bounds, None, mu, "override", domain, m, rounding)
}
