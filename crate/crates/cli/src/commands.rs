//! Artifact-producing and checking commands.

use std::path::PathBuf;

use serde::Serialize;
use tll_core::cpwa::{sup_error, GridCpwa, Partition};
use tll_core::dynamics::{deviation_check, invariance_check, simulate, step_count, InvarianceReport};
use tll_core::sampling::Halton;
use tll_core::simrel::{check_ad_sim, quantize_embedding, FiniteTransitionSystem, LabelMode, SimOutcome};
use tll_core::sizing::{gronwall_bound, Rounding, SizingReport};
use tll_core::tll::{lower_to_relu, ArchDescriptor, FromPiecesOptions, TllNetwork};
use tll_core::{sup_dist, Controller, Exec};

use crate::{domain_check, expert, k_cont, pendulum, sizing, CliError, CliResult, LoadedController, OutputDir, RunConfig};

const LATTICE_TOL: f64 = 1e-8;
const RELU_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct LatticeSummary {
    pub pieces: usize,
    pub arch: ArchDescriptor,
    pub max_gap_tll_cpwa: f64,
    pub max_gap_relu_tll: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct BuildReport {
    pub sizing: SizingReport,
    pub k_cont_source: String,
    pub eta_used: f64,
    pub rho: f64,
    pub grid: Vec<usize>,
    pub centers: usize,
    pub clamped_center_values: usize,
    pub piece_count_within_bound: Option<bool>,
    pub lattice: Option<LatticeSummary>,
    pub artifacts: Vec<String>,
}

/// Max of `‖a(x) − b(x)‖_∞` over Halton points of the domain.
fn max_gap(a: &dyn Controller, b: &dyn Controller, domain: &tll_core::Hyperbox, samples: usize, seed: u64, exec: Exec) -> f64 {
    let seq = Halton::new(domain.dim(), seed);
    exec.max(samples, |i| {
        let x = seq.point(domain, i);
        sup_dist(&a.control(&x), &b.control(&x))
    })
}

fn build_inner(cfg: &RunConfig, out: &mut OutputDir) -> CliResult<BuildReport> {
    let (report, _) = sizing(cfg, Rounding::Ceil)?;
    let (_, k_source) = k_cont(cfg)?;
    let ex = expert(cfg)?;
    let eta = report.eta * cfg.eta_scale;
    let partition = Partition::new(cfg.domain.clone(), eta, cfg.rho)?;
    let (cpwa, clamped) = GridCpwa::build(&ex, partition, Some(&cfg.control_box))?;
    let mut artifacts = vec![out.write_json("cpwa.json", &cpwa)?];

    let n = cfg.domain.dim();
    let mut lattice = None;
    let mut within = None;
    if n <= 2 {
        let pieces = cpwa.enumerate_pieces()?;
        within = Some(pieces.len() as u64 <= report.region_bound);
        let opts = FromPiecesOptions { seed: cfg.seed, exec: cfg.exec(), ..Default::default() };
        let net = TllNetwork::from_pieces(&pieces, &opts)?;
        let relu = lower_to_relu(&net);
        let g1 = max_gap(&net, &cpwa, &cfg.domain, cfg.samples, cfg.seed, cfg.exec());
        let g2 = max_gap(&relu, &net, &cfg.domain, cfg.samples, cfg.seed.wrapping_add(1), cfg.exec());
        if !(g1 <= LATTICE_TOL && g2 <= RELU_TOL) {
            return Err(CliError::runtime(format!("equivalence gaps too large: lattice {g1:e}, relu {g2:e}")));
        }
        artifacts.push(out.write_json("tll.json", &net)?);
        artifacts.push(out.write_json("relu.json", &relu)?);
        artifacts.push(out.write("relu_weights.txt", relu.to_weights_text().as_bytes())?);
        lattice = Some(LatticeSummary {
            pieces: pieces.len(),
            arch: net.arch(),
            max_gap_tll_cpwa: g1,
            max_gap_relu_tll: g2,
            samples: cfg.samples,
        });
    } else {
        log::warn!("state dimension {n} > 2: writing the grid approximation only");
    }
    let mut report = BuildReport {
        sizing: report,
        k_cont_source: k_source,
        eta_used: eta,
        rho: cfg.rho,
        grid: cpwa.partition().dims.clone(),
        centers: cpwa.partition().center_count(),
        clamped_center_values: clamped.len(),
        piece_count_within_bound: within,
        lattice,
        artifacts: Vec::new(),
    };
    artifacts.push(out.path("build_report.json"));
    report.artifacts = artifacts
        .iter()
        .map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default())
        .collect();
    out.write_json("build_report.json", &report)?;
    Ok(report)
}

/// Size, sample the expert on the grid, realize it as lattice and ReLU
/// networks, and write all artifacts. Nothing is left behind on failure.
pub fn cmd_build(cfg: &RunConfig) -> CliResult<BuildReport> {
    cfg.validate()?;
    let mut out = OutputDir::create(&cfg.output_dir)?;
    match build_inner(cfg, &mut out) {
        Ok(r) => Ok(r),
        Err(e) => {
            out.discard();
            Err(e)
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub x0: Vec<f64>,
    pub csv: String,
    pub final_state: Vec<f64>,
    /// First time after which the state never leaves the target box.
    pub entry_time: Option<f64>,
    pub enters_and_stays: bool,
    pub max_abs_control: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateReport {
    pub controller: String,
    pub horizon: f64,
    pub dt: f64,
    pub target_box: tll_core::Hyperbox,
    pub runs: Vec<RunSummary>,
}

fn controller_path(cfg: &RunConfig) -> PathBuf {
    cfg.controller.clone().unwrap_or_else(|| cfg.output_dir.join("tll.json"))
}

/// Closed-loop runs from every configured initial state.
pub fn cmd_simulate(cfg: &RunConfig) -> CliResult<SimulateReport> {
    cfg.validate()?;
    let sys = pendulum(cfg)?;
    let path = controller_path(cfg);
    let (ctrl, name): (Box<dyn Controller>, String) = if path.as_os_str() == "expert" {
        (Box::new(expert(cfg)?), "expert".into())
    } else {
        let c = LoadedController::load(&path)?;
        domain_check(c.input_dim(), &cfg.domain)?;
        (Box::new(c), path.display().to_string())
    };
    let mut out = OutputDir::create(&cfg.output_dir)?;
    let mut runs = Vec::new();
    for (i, x0) in cfg.x0.iter().enumerate() {
        let tr = simulate(&sys, ctrl.as_ref(), x0, cfg.horizon, cfg.sim_dt)?;
        let mut buf = Vec::new();
        tr.write_csv(&mut buf)?;
        let csv_name = format!("trajectory_{i}.csv");
        out.write(&csv_name, &buf)?;
        let entry = tr.entry_time(&cfg.target_box);
        runs.push(RunSummary {
            x0: x0.clone(),
            csv: csv_name,
            final_state: tr.last().to_vec(),
            entry_time: entry,
            enters_and_stays: entry.is_some(),
            max_abs_control: tr.u.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max),
        });
    }
    let report = SimulateReport {
        controller: name,
        horizon: cfg.horizon,
        dt: cfg.sim_dt,
        target_box: cfg.target_box.clone(),
        runs,
    };
    out.write_json("simulate_summary.json", &report)?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct QuantizedSimCheck {
    pub pitch: f64,
    pub delta: f64,
    pub states: usize,
    pub outcome: SimOutcome,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub mu: f64,
    pub delta: f64,
    pub tau: f64,
    pub eta_chain: f64,
    pub eta_artifact: Vec<f64>,
    pub k_cont: f64,
    /// Asserted checks; the command fails if any of them fails.
    pub checks: Vec<CheckResult>,
    /// Grönwall bound evaluated at the largest observed control gap.
    pub gronwall_at_control_gap: f64,
    pub invariance: Option<InvarianceReport>,
    pub invariance_error: Option<String>,
    pub quantized_simulation: Option<QuantizedSimCheck>,
    pub passed: bool,
}

/// Re-check the guarantees of the built grid approximation against the
/// expert: accuracy `μ/3`, deviation `δ` after one sampling period, and the
/// recorded `(δ, τ)` invariance and quantized simulation verdicts.
pub fn cmd_verify(cfg: &RunConfig) -> CliResult<VerifyReport> {
    cfg.validate()?;
    let sys = pendulum(cfg)?;
    let path = cfg.output_dir.join("cpwa.json");
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::config(format!("missing artifact {} (run `build` first): {e}", path.display())))?;
    let cpwa = GridCpwa::from_json(&text)?;
    domain_check(cpwa.partition().dim(), &cfg.domain)?;
    let (report, plant) = sizing(cfg, Rounding::Ceil)?;
    let delta = cfg.delta.unwrap_or(report.delta_required);
    let ex = expert(cfg)?;
    let exec = cfg.exec();
    let dt = cfg.check_dt.unwrap_or(report.tau / 100.0);

    let err = sup_error(&cpwa, &ex, cfg.samples, cfg.seed, exec);
    let seq = Halton::new(cfg.domain.dim(), cfg.seed.wrapping_add(7));
    let inits: Vec<Vec<f64>> = (0..cfg.deviation_samples).map(|i| seq.point(&cfg.domain, i)).collect();
    let dev = deviation_check(&sys, &ex, &cpwa, report.tau, &inits, dt, exec)?;
    let checks = vec![
        CheckResult { name: "sup_error".into(), value: err, bound: report.mu / 3.0, passed: err <= report.mu / 3.0 + 1e-9 },
        CheckResult { name: "deviation_at_tau".into(), value: dev.max_deviation, bound: delta, passed: dev.max_deviation <= delta },
    ];
    let (invariance, invariance_error) = match invariance_check(
        &sys,
        &cpwa,
        delta,
        report.tau,
        cfg.invariance_samples,
        cfg.invariance_periods,
        dt,
        cfg.seed,
        exec,
    ) {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let quantized_simulation = match cfg.quantize_pitch {
        None => None,
        Some(pitch) => {
            let qdt = report.tau / step_count(report.tau, dt).max(1) as f64;
            let s = quantize_embedding(&sys, &ex, report.tau, pitch, qdt, exec)?;
            let t = quantize_embedding(&sys, &cpwa, report.tau, pitch, qdt, exec)?;
            let mode = if cfg.strict_labels { LabelMode::Strict } else { LabelMode::Permissive };
            Some(QuantizedSimCheck { pitch, delta, states: s.len(), outcome: check_ad_sim(&s, &t, delta, mode)? })
        }
    };
    let passed = checks.iter().all(|c| c.passed);
    let v = VerifyReport {
        mu: report.mu,
        delta,
        tau: report.tau,
        eta_chain: report.eta,
        eta_artifact: cpwa.partition().pitch.clone(),
        k_cont: report.bounds.k_cont,
        checks,
        gronwall_at_control_gap: gronwall_bound(dev.max_control_gap, report.tau, plant.k_x, plant.k_u),
        invariance,
        invariance_error,
        quantized_simulation,
        passed,
    };
    let mut out = OutputDir::create(&cfg.output_dir)?;
    out.write_json("verify_report.json", &v)?;
    if !passed {
        let failed: Vec<String> = v
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| format!("{} = {:e} > {:e}", c.name, c.value, c.bound))
            .collect();
        return Err(CliError::runtime(format!("verification failed: {}", failed.join("; "))));
    }
    Ok(v)
}

#[derive(Debug, Clone, Serialize)]
pub struct SimCheckReport {
    pub delta: f64,
    pub mode: LabelMode,
    pub s_states: usize,
    pub t_states: usize,
    pub outcome: SimOutcome,
}

fn read_system(path: &std::path::Path) -> CliResult<FiniteTransitionSystem> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    Ok(FiniteTransitionSystem::from_json(&text)?)
}

/// Decide abstract-disturbance simulation between two transition systems
/// read from JSON, or between the quantized closed loops of the expert and
/// the built grid approximation when no files are given.
pub fn cmd_check_sim(cfg: &RunConfig, s_path: Option<PathBuf>, t_path: Option<PathBuf>) -> CliResult<SimCheckReport> {
    cfg.validate()?;
    let mut out = OutputDir::create(&cfg.output_dir)?;
    let (s, t, delta) = match (s_path, t_path) {
        (Some(sp), Some(tp)) => {
            let delta = cfg.delta.ok_or_else(|| CliError::config("check-sim needs --delta"))?;
            (read_system(&sp)?, read_system(&tp)?, delta)
        }
        (None, None) => {
            let sys = pendulum(cfg)?;
            let (report, _) = sizing(cfg, Rounding::Ceil)?;
            let delta = cfg.delta.unwrap_or(report.delta_required);
            let pitch = cfg.quantize_pitch.unwrap_or(0.25);
            let path = controller_path(cfg);
            let ctrl = LoadedController::load(&path)?;
            domain_check(ctrl.input_dim(), &cfg.domain)?;
            let ex = expert(cfg)?;
            let dt = cfg.check_dt.unwrap_or(report.tau / 100.0);
            let s = quantize_embedding(&sys, &ex, report.tau, pitch, dt, cfg.exec())?;
            let t = quantize_embedding(&sys, &ctrl, report.tau, pitch, dt, cfg.exec())?;
            out.write_json("system_s.json", &s)?;
            out.write_json("system_t.json", &t)?;
            out.write("system_s.dot", s.to_dot("S").as_bytes())?;
            out.write("system_t.dot", t.to_dot("T").as_bytes())?;
            (s, t, delta)
        }
        _ => return Err(CliError::config("give both --s and --t, or neither")),
    };
    let mode = if cfg.strict_labels { LabelMode::Strict } else { LabelMode::Permissive };
    let outcome = check_ad_sim(&s, &t, delta, mode)?;
    let report = SimCheckReport { delta, mode, s_states: s.len(), t_states: t.len(), outcome };
    out.write_json("sim_check.json", &report)?;
    Ok(report)
}
