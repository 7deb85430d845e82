use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tll_cli::{
    cmd_build, cmd_check_sim, cmd_paper_table, cmd_simulate, cmd_size, cmd_verify, BoundsMethod, CliError, KCont,
    Overrides, RunConfig, SystemKind,
};
use tll_core::sizing::Rounding;

#[derive(Parser)]
#[command(name = "tll", version, about = "Size, build and verify lattice ReLU controllers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the sizing report (μ, τ, η, region bound, architecture).
    Size(Common),
    /// Recompute the reference sizing table and compare cell by cell.
    PaperTable(Common),
    /// Build the grid approximation, lattice and ReLU artifacts.
    Build {
        #[command(flatten)]
        common: Common,
        /// Approximate a constant controller instead (comma-separated values).
        #[arg(long, value_delimiter = ',')]
        expert_constant: Option<Vec<f64>>,
    },
    /// Simulate the closed loop under a controller artifact.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Check accuracy, deviation and invariance of the built artifacts.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Also compare quantized closed loops at this grid pitch.
        #[arg(long)]
        quantize_pitch: Option<f64>,
    },
    /// Decide abstract-disturbance simulation between transition systems.
    CheckSim {
        #[command(flatten)]
        common: Common,
        /// Simulated system (JSON).
        #[arg(long = "s")]
        s: Option<PathBuf>,
        /// Simulating system (JSON).
        #[arg(long = "t")]
        t: Option<PathBuf>,
        #[arg(long)]
        quantize_pitch: Option<f64>,
        /// Controller artifact for the quantized closed loop.
        #[arg(long)]
        controller: Option<PathBuf>,
        /// Match transitions only on equal labels.
        #[arg(long)]
        strict_labels: bool,
    },
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// `pendulum` or `bounds`.
    #[arg(long)]
    system: Option<SystemKind>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    /// Controller Lipschitz budget, or `measured`.
    #[arg(long)]
    kcont: Option<KCont>,
    #[arg(long)]
    kx: Option<f64>,
    #[arg(long)]
    ku: Option<f64>,
    #[arg(long)]
    kvf: Option<f64>,
    /// `interval` or `sampled`.
    #[arg(long)]
    bounds_method: Option<BoundsMethod>,
    #[arg(long)]
    rho: Option<f64>,
    /// Multiply the grid pitch from the sizing chain.
    #[arg(long)]
    eta_scale: Option<f64>,
    /// `ceil`, `round` or `floor`.
    #[arg(long)]
    rounding: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    samples: Option<usize>,
    /// Run every sweep on one thread.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct SimArgs {
    /// Controller artifact (cpwa/tll/relu JSON) or `expert`.
    #[arg(long)]
    controller: Option<PathBuf>,
    /// Initial state, comma-separated; repeat for several runs.
    #[arg(long = "x0", allow_hyphen_values = true)]
    x0: Vec<String>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
}

impl Common {
    fn overrides(&self) -> Result<Overrides, CliError> {
        let rounding = match &self.rounding {
            None => None,
            Some(r) => Some(r.parse::<Rounding>().map_err(CliError::from)?),
        };
        Ok(Overrides {
            system: self.system,
            delta: self.delta,
            mu: self.mu,
            k_cont: self.kcont,
            k_x: self.kx,
            k_u: self.ku,
            k_vf: self.kvf,
            bounds_method: self.bounds_method,
            rho: self.rho,
            eta_scale: self.eta_scale,
            rounding,
            seed: self.seed,
            samples: self.samples,
            output_dir: self.output_dir.clone(),
            sequential: self.sequential,
            ..Default::default()
        })
    }

    fn config(&self, extra: impl FnOnce(&mut Overrides)) -> Result<RunConfig, CliError> {
        let base = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let mut o = self.overrides()?;
        extra(&mut o);
        o.apply(base)
    }
}

fn parse_states(raw: &[String]) -> Result<Vec<Vec<f64>>, CliError> {
    raw.iter()
        .map(|s| {
            s.split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|_| CliError::config(format!("bad initial state `{s}`"))))
                .collect()
        })
        .collect()
}

fn print_json<T: serde::Serialize>(v: &T) {
    let mut out = std::io::stdout().lock();
    if serde_json::to_writer_pretty(&mut out, v).is_ok() {
        let _ = writeln!(out);
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Size(c) => print_json(&cmd_size(&c.config(|_| {})?)?),
        Command::PaperTable(c) => {
            let cfg = c.config(|_| {})?;
            let (_, console) = cmd_paper_table(&cfg)?;
            print!("{console}");
        }
        Command::Build { common, expert_constant } => {
            print_json(&cmd_build(&common.config(|o| o.expert_constant = expert_constant)?)?)
        }
        Command::Simulate { common, sim } => {
            let states = parse_states(&sim.x0)?;
            let cfg = common.config(|o| {
                o.controller = sim.controller;
                o.x0 = states;
                o.horizon = sim.horizon;
                o.sim_dt = sim.dt;
            })?;
            print_json(&cmd_simulate(&cfg)?)
        }
        Command::Verify { common, quantize_pitch } => {
            print_json(&cmd_verify(&common.config(|o| o.quantize_pitch = quantize_pitch)?)?)
        }
        Command::CheckSim { common, s, t, quantize_pitch, controller, strict_labels } => {
            let cfg = common.config(|o| {
                o.quantize_pitch = quantize_pitch;
                o.controller = controller;
                o.strict_labels = strict_labels;
            })?;
            print_json(&cmd_check_sim(&cfg, s, t)?)
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
