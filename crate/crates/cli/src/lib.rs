//! Pipeline glue behind the `tll` binary: configuration, sizing, artifact
//! construction, simulation and verification commands.

mod commands;
mod config;
mod table;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use tll_core::cpwa::GridCpwa;
use tll_core::dynamics::{estimate_bounds, measure_lipschitz, pendulum_interval_bounds, ExpertController, Pendulum, PlantBounds};
use tll_core::sizing::{size_report, size_report_for_mu, LipschitzBounds, Rounding, SizingReport};
use tll_core::tll::{ReluNetwork, TllNetwork};
use tll_core::{Controller, Hyperbox};

pub use commands::{cmd_build, cmd_check_sim, cmd_simulate, cmd_verify, BuildReport, VerifyReport};
pub use config::{BoundsMethod, ExpertSpec, KCont, Overrides, PlantConstants, RunConfig, SystemKind};
pub use table::{cmd_paper_table, PaperRow, TableRow, PAPER_ROWS};

/// Grid per axis when measuring the expert's Lipschitz constant.
const LIPSCHITZ_GRID: usize = 201;

/// Failure of a command, split by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Invalid configuration or missing inputs (exit code 2).
    Config(anyhow::Error),
    /// Numerical or verification failure (exit code 3).
    Runtime(anyhow::Error),
}

impl CliError {
    pub fn config(msg: impl fmt::Display) -> Self {
        CliError::Config(anyhow::anyhow!("{msg}"))
    }

    pub fn runtime(msg: impl fmt::Display) -> Self {
        CliError::Runtime(anyhow::anyhow!("{msg}"))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "configuration error: {e:#}"),
            CliError::Runtime(e) => write!(f, "error: {e:#}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<tll_core::Error> for CliError {
    fn from(e: tll_core::Error) -> Self {
        use tll_core::Error as E;
        match e {
            E::InvalidInput(_) | E::InvalidPitch { .. } | E::UnsupportedDimension(_) => CliError::Config(e.into()),
            _ => CliError::Runtime(e.into()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Creates the output directory and writes files into it.
pub struct OutputDir {
    root: PathBuf,
    written: Vec<PathBuf>,
}

impl OutputDir {
    pub fn create(root: &Path) -> CliResult<Self> {
        fs::create_dir_all(root).map_err(|e| CliError::runtime(format!("cannot create {}: {e}", root.display())))?;
        Ok(Self { root: root.to_path_buf(), written: Vec::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write(&mut self, name: &str, contents: &[u8]) -> CliResult<PathBuf> {
        let p = self.path(name);
        fs::write(&p, contents).map_err(|e| CliError::runtime(format!("cannot write {}: {e}", p.display())))?;
        self.written.push(p.clone());
        Ok(p)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<PathBuf> {
        let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::runtime(e.to_string()))?;
        s.push('\n');
        self.write(name, s.as_bytes())
    }

    /// Delete everything written through this handle.
    pub fn discard(&mut self) {
        for p in self.written.drain(..) {
            let _ = fs::remove_file(p);
        }
    }
}

pub(crate) fn pendulum(cfg: &RunConfig) -> CliResult<Pendulum> {
    if cfg.system != SystemKind::Pendulum {
        return Err(CliError::config("this command needs the built-in pendulum system"));
    }
    Ok(Pendulum::new(cfg.pendulum, cfg.domain.clone(), cfg.control_box.clone())?)
}

/// The controller being approximated.
pub(crate) enum Expert {
    Feedback(ExpertController),
    Constant(Vec<f64>),
}

impl Controller for Expert {
    fn control(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Expert::Feedback(c) => c.control(x),
            Expert::Constant(v) => v.clone(),
        }
    }
}

pub(crate) fn expert(cfg: &RunConfig) -> CliResult<Expert> {
    match &cfg.expert {
        ExpertSpec::Constant(v) => Ok(Expert::Constant(v.clone())),
        ExpertSpec::Feedback => {
            pendulum(cfg)?;
            Ok(Expert::Feedback(ExpertController::new(cfg.pendulum, cfg.gains, cfg.control_box.clone())))
        }
    }
}

/// `K_x`, `K_u`, `K_vf` for the configured system.
pub fn plant_bounds(cfg: &RunConfig) -> CliResult<PlantBounds> {
    match cfg.system {
        SystemKind::Bounds => {
            let b = cfg.bounds.ok_or_else(|| CliError::config("system `bounds` needs k_x, k_u and k_vf"))?;
            Ok(PlantBounds {
                k_x: b.k_x,
                k_u: b.k_u,
                k_vf: b.k_vf,
                k_vf_sampled: f64::NAN,
                safety: 1.0,
                samples: 0,
                method: "given".into(),
            })
        }
        SystemKind::Pendulum => match cfg.bounds_method {
            BoundsMethod::Interval => Ok(pendulum_interval_bounds(&cfg.pendulum, &cfg.domain, &cfg.control_box)),
            BoundsMethod::Sampled => Ok(estimate_bounds(&pendulum(cfg)?, cfg.grid_per_axis, cfg.safety, cfg.exec())?),
        },
    }
}

/// The controller Lipschitz budget and where it came from.
pub fn k_cont(cfg: &RunConfig) -> CliResult<(f64, String)> {
    match cfg.k_cont {
        KCont::Value(v) => Ok((v, "given".into())),
        KCont::Measured => {
            let e = expert(cfg)?;
            let k = measure_lipschitz(&e, &cfg.domain, LIPSCHITZ_GRID, tll_core::dynamics::FD_STEP, cfg.exec());
            let k = (k * cfg.lipschitz_margin).max(f64::MIN_POSITIVE);
            Ok((k, format!("measured on a {LIPSCHITZ_GRID}-point grid, x{}", cfg.lipschitz_margin)))
        }
    }
}

/// Sizing report for the configured system; exactly one of `delta`, `mu`
/// must be set.
pub fn sizing(cfg: &RunConfig, default_rounding: Rounding) -> CliResult<(SizingReport, PlantBounds)> {
    let plant = plant_bounds(cfg)?;
    let (kc, _) = k_cont(cfg)?;
    let rounding = cfg.rounding.unwrap_or(default_rounding);
    let m = cfg.control_box.dim();
    let report = match (cfg.delta, cfg.mu) {
        (Some(_), Some(_)) => return Err(CliError::config("give either delta or mu, not both")),
        (None, None) => return Err(CliError::config("sizing needs --delta <margin> or --mu <accuracy>")),
        (Some(delta), None) => size_report(&plant.system_bounds(kc, delta)?, &cfg.domain, m, rounding)?,
        (None, Some(mu)) => {
            let lip = LipschitzBounds { k_x: plant.k_x, k_u: plant.k_u, k_vf: plant.k_vf, k_cont: kc };
            lip.validate()?;
            size_report_for_mu(&lip, mu, &cfg.domain, m, rounding)?
        }
    };
    Ok((report, plant))
}

pub fn cmd_size(cfg: &RunConfig) -> CliResult<SizingReport> {
    cfg.validate()?;
    let (report, _) = sizing(cfg, Rounding::Ceil)?;
    let mut out = OutputDir::create(&cfg.output_dir)?;
    out.write_json("size_report.json", &report)?;
    Ok(report)
}

/// A controller read back from an artifact file.
pub enum LoadedController {
    Cpwa(GridCpwa),
    Tll(TllNetwork),
    Relu(ReluNetwork),
}

impl Controller for LoadedController {
    fn control(&self, x: &[f64]) -> Vec<f64> {
        match self {
            LoadedController::Cpwa(c) => c.eval(x),
            LoadedController::Tll(t) => t.eval(x),
            LoadedController::Relu(r) => r.eval(x),
        }
    }
}

impl LoadedController {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read controller {}: {e}", path.display())))?;
        let v: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        if v.get("outputs").is_some() {
            Ok(LoadedController::Tll(TllNetwork::from_json(&text)?))
        } else if v.get("layers").is_some() {
            Ok(LoadedController::Relu(ReluNetwork::from_json(&text)?))
        } else if v.get("values").is_some() {
            Ok(LoadedController::Cpwa(GridCpwa::from_json(&text)?))
        } else {
            Err(CliError::config(format!("{} is not a controller artifact", path.display())))
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            LoadedController::Cpwa(c) => c.partition().dim(),
            LoadedController::Tll(t) => t.n,
            LoadedController::Relu(r) => r.input_dim(),
        }
    }
}

pub(crate) fn domain_check(controller_dim: usize, domain: &Hyperbox) -> CliResult<()> {
    if controller_dim != domain.dim() {
        return Err(CliError::config(format!(
            "controller takes {controller_dim}-D states but the domain is {}-D",
            domain.dim()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn discard_removes_only_written_files() {
        let dir = tempfile::TempDir::new().unwrap();
        fs::write(dir.path().join("keep.txt"), b"x").unwrap();
        let mut out = OutputDir::create(&dir.path().join("sub")).unwrap();
        let a = out.write("a.txt", b"1").unwrap();
        let b = out.write_json("b.json", &[1, 2]).unwrap();
        assert_eq!(fs::read_to_string(&b).unwrap(), "[\n  1,\n  2\n]\n");
        out.discard();
        assert!(!a.exists() && !b.exists());
        assert!(dir.path().join("keep.txt").exists());
    }

    #[test]
    fn error_exit_codes() {
        assert_eq!(CliError::config("x").exit_code(), 2);
        assert_eq!(CliError::runtime("x").exit_code(), 3);
        let e: CliError = tll_core::Error::InvalidInput("bad".into()).into();
        assert_eq!(e.exit_code(), 2);
    }
}
