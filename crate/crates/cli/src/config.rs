//! Run configuration: JSON file plus command-line overrides.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use tll_core::dynamics::PendulumParams;
use tll_core::sizing::Rounding;
use tll_core::Hyperbox;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SystemKind {
    /// Built-in inverted pendulum.
    #[default]
    Pendulum,
    /// Plant constants given directly; sizing only.
    Bounds,
}

impl FromStr for SystemKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "pendulum" => Ok(Self::Pendulum),
            "bounds" => Ok(Self::Bounds),
            _ => Err(format!("unknown system `{s}` (expected pendulum or bounds)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundsMethod {
    /// Closed-form bounds with `|sin|, |cos| ≤ 1`.
    #[default]
    Interval,
    /// Grid sampling of `X × U`.
    Sampled,
}

impl FromStr for BoundsMethod {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "interval" => Ok(Self::Interval),
            "sampled" => Ok(Self::Sampled),
            _ => Err(format!("unknown bounds method `{s}` (expected interval or sampled)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantConstants {
    pub k_x: f64,
    pub k_u: f64,
    pub k_vf: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum MeasuredTag {
    Measured,
}

/// Controller Lipschitz budget: a number, or `"measured"` from the expert.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KCont {
    Value(f64),
    #[serde(with = "measured")]
    Measured,
}

mod measured {
    use super::MeasuredTag;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(s: S) -> Result<S::Ok, S::Error> {
        MeasuredTag::Measured.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<(), D::Error> {
        MeasuredTag::deserialize(d).map(|_| ())
    }
}

impl Default for KCont {
    fn default() -> Self {
        KCont::Value(0.1)
    }
}

impl FromStr for KCont {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s == "measured" {
            return Ok(KCont::Measured);
        }
        s.parse::<f64>().map(KCont::Value).map_err(|_| format!("K_cont must be a number or `measured`, got `{s}`"))
    }
}

impl fmt::Display for KCont {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KCont::Value(v) => write!(f, "{v}"),
            KCont::Measured => f.write_str("measured"),
        }
    }
}

/// The controller that gets approximated.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExpertSpec {
    /// Saturated feedback-linearizing PD law.
    #[default]
    Feedback,
    Constant(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemKind,
    pub pendulum: PendulumParams,
    /// Plant constants for `system = "bounds"`.
    pub bounds: Option<PlantConstants>,
    pub bounds_method: BoundsMethod,
    pub grid_per_axis: usize,
    /// Inflation of the sampled vector-field bound.
    pub safety: f64,
    pub domain: Hyperbox,
    pub control_box: Hyperbox,
    /// Box that simulated trajectories should enter and stay in.
    pub target_box: Hyperbox,
    pub k_cont: KCont,
    /// Inflation applied to a measured `K_cont`.
    pub lipschitz_margin: f64,
    pub delta: Option<f64>,
    pub mu: Option<f64>,
    pub rho: f64,
    /// Multiplies the grid pitch from the sizing chain.
    pub eta_scale: f64,
    pub gains: (f64, f64),
    pub expert: ExpertSpec,
    pub rounding: Option<Rounding>,
    pub seed: u64,
    pub samples: usize,
    pub deviation_samples: usize,
    pub invariance_samples: usize,
    pub invariance_periods: usize,
    /// Integration step for the `τ`-horizon checks; `τ/100` when absent.
    pub check_dt: Option<f64>,
    pub sim_dt: f64,
    pub horizon: f64,
    pub x0: Vec<Vec<f64>>,
    pub quantize_pitch: Option<f64>,
    pub controller: Option<PathBuf>,
    pub strict_labels: bool,
    pub output_dir: PathBuf,
    pub sequential: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            system: SystemKind::Pendulum,
            pendulum: PendulumParams::default(),
            bounds: None,
            bounds_method: BoundsMethod::Interval,
            grid_per_axis: 101,
            safety: 1.1,
            domain: Hyperbox::cube(2, -1.0, 1.0).expect("valid box"),
            control_box: Hyperbox::cube(1, -6.0, 6.0).expect("valid box"),
            target_box: Hyperbox::new(vec![-1.0, -0.5], vec![1.0, 0.5]).expect("valid box"),
            k_cont: KCont::default(),
            lipschitz_margin: 1.05,
            delta: None,
            mu: None,
            rho: 0.5,
            eta_scale: 1.0,
            gains: (4.0, 4.0),
            expert: ExpertSpec::Feedback,
            rounding: None,
            seed: 0,
            samples: 10_000,
            deviation_samples: 100,
            invariance_samples: 200,
            invariance_periods: 5,
            check_dt: None,
            sim_dt: 1e-3,
            horizon: 10.0,
            x0: vec![vec![0.7, 0.5], vec![-0.4, 1.0]],
            quantize_pitch: None,
            controller: None,
            strict_labels: false,
            output_dir: PathBuf::from("tll-out"),
            sequential: false,
        }
    }
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(CliError::config(format!("{name} must be positive and finite, got {v}")))
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::config(format!("config {}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.pendulum.validate()?;
        self.domain.validate()?;
        self.control_box.validate()?;
        self.target_box.validate()?;
        if self.target_box.dim() != self.domain.dim() {
            return Err(CliError::config("target box and domain differ in dimension"));
        }
        if self.system == SystemKind::Pendulum && (self.domain.dim() != 2 || self.control_box.dim() != 1) {
            return Err(CliError::config("the pendulum needs a 2-D domain and a 1-D control box"));
        }
        if let KCont::Value(v) = self.k_cont {
            positive("K_cont", v)?;
        }
        if let Some(d) = self.delta {
            positive("delta", d)?;
        }
        if let Some(m) = self.mu {
            positive("mu", m)?;
        }
        for (name, v) in [
            ("safety", self.safety),
            ("lipschitz_margin", self.lipschitz_margin),
            ("eta_scale", self.eta_scale),
            ("sim_dt", self.sim_dt),
            ("horizon", self.horizon),
        ] {
            positive(name, v)?;
        }
        if let Some(dt) = self.check_dt {
            positive("check_dt", dt)?;
        }
        if let Some(p) = self.quantize_pitch {
            positive("quantize_pitch", p)?;
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(CliError::config(format!("rho must lie in (0, 1), got {}", self.rho)));
        }
        if self.grid_per_axis < 2 {
            return Err(CliError::config("grid_per_axis must be at least 2"));
        }
        if self.x0.iter().any(|x| x.len() != self.domain.dim()) {
            return Err(CliError::config("initial states must match the domain dimension"));
        }
        if let ExpertSpec::Constant(v) = &self.expert {
            if v.len() != self.control_box.dim() || v.iter().any(|u| !u.is_finite()) {
                return Err(CliError::config("constant expert must give one finite value per control"));
            }
        }
        Ok(())
    }

    pub fn exec(&self) -> tll_core::Exec {
        if self.sequential {
            tll_core::Exec::Sequential
        } else {
            tll_core::Exec::Parallel
        }
    }
}

/// Command-line values that override the configuration file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub system: Option<SystemKind>,
    pub delta: Option<f64>,
    pub mu: Option<f64>,
    pub k_cont: Option<KCont>,
    pub k_x: Option<f64>,
    pub k_u: Option<f64>,
    pub k_vf: Option<f64>,
    pub bounds_method: Option<BoundsMethod>,
    pub rho: Option<f64>,
    pub eta_scale: Option<f64>,
    pub rounding: Option<Rounding>,
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub output_dir: Option<PathBuf>,
    pub sequential: bool,
    pub controller: Option<PathBuf>,
    pub x0: Vec<Vec<f64>>,
    pub horizon: Option<f64>,
    pub sim_dt: Option<f64>,
    pub quantize_pitch: Option<f64>,
    pub strict_labels: bool,
    pub expert_constant: Option<Vec<f64>>,
}

impl Overrides {
    pub fn apply(self, mut c: RunConfig) -> Result<RunConfig, CliError> {
        macro_rules! set {
            ($($field:ident => $target:ident),* $(,)?) => {
                $(if let Some(v) = self.$field { c.$target = v; })*
            };
        }
        set!(system => system, k_cont => k_cont, bounds_method => bounds_method, rho => rho,
             eta_scale => eta_scale, seed => seed, samples => samples, output_dir => output_dir,
             horizon => horizon, sim_dt => sim_dt);
        if self.delta.is_some() {
            c.delta = self.delta;
        }
        if self.mu.is_some() {
            c.mu = self.mu;
        }
        if self.rounding.is_some() {
            c.rounding = self.rounding;
        }
        if self.controller.is_some() {
            c.controller = self.controller;
        }
        if self.quantize_pitch.is_some() {
            c.quantize_pitch = self.quantize_pitch;
        }
        if let Some(v) = self.expert_constant {
            c.expert = ExpertSpec::Constant(v);
        }
        if !self.x0.is_empty() {
            c.x0 = self.x0;
        }
        c.sequential |= self.sequential;
        c.strict_labels |= self.strict_labels;
        if self.k_x.is_some() || self.k_u.is_some() || self.k_vf.is_some() {
            let base = c.bounds.unwrap_or(PlantConstants { k_x: f64::NAN, k_u: f64::NAN, k_vf: f64::NAN });
            let b = PlantConstants {
                k_x: self.k_x.unwrap_or(base.k_x),
                k_u: self.k_u.unwrap_or(base.k_u),
                k_vf: self.k_vf.unwrap_or(base.k_vf),
            };
            c.bounds = Some(b);
        }
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_json_roundtrip() {
        let c = RunConfig { k_cont: KCont::Measured, expert: ExpertSpec::Constant(vec![1.5]), ..Default::default() };
        let s = serde_json::to_string(&c).unwrap();
        assert!(s.contains("\"k_cont\":\"measured\""));
        let back: RunConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn partial_config_uses_defaults() {
        let c: RunConfig = serde_json::from_str(r#"{"mu": 0.15, "k_cont": 0.2}"#).unwrap();
        assert_eq!(c.mu, Some(0.15));
        assert_eq!(c.k_cont, KCont::Value(0.2));
        assert_eq!(c.rho, 0.5);
        assert!(serde_json::from_str::<RunConfig>(r#"{"muu": 1}"#).is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"k_cont": "guess"}"#).is_err());
    }

    #[test]
    fn overrides_win() {
        let c: RunConfig = serde_json::from_str(r#"{"mu": 0.15, "seed": 3}"#).unwrap();
        let o = Overrides { mu: Some(0.3), k_cont: Some("measured".parse().unwrap()), ..Default::default() };
        let c = o.apply(c).unwrap();
        assert_eq!(c.mu, Some(0.3));
        assert_eq!(c.seed, 3);
        assert_eq!(c.k_cont, KCont::Measured);
    }

    #[test]
    fn validation() {
        let mut c = RunConfig::default();
        assert!(c.validate().is_ok());
        c.rho = 1.0;
        assert!(c.validate().is_err());
        assert!(RunConfig { delta: Some(-1.0), ..Default::default() }.validate().is_err());
        assert!(RunConfig { x0: vec![vec![0.0]], ..Default::default() }.validate().is_err());
    }
}
