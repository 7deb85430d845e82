//! Sequential vs rayon execution of the sample sweeps.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use tll_core::cpwa::{sup_error, GridCpwa, Partition};
use tll_core::dynamics::{estimate_bounds, measure_lipschitz, ExpertController, Pendulum, PendulumParams, FD_STEP};
use tll_core::tll::{FromPiecesOptions, TllNetwork};
use tll_core::{Exec, Hyperbox};

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn domain() -> Hyperbox {
    Hyperbox::new(vec![-6.0, -6.0], vec![6.0, 6.0]).unwrap()
}

fn pendulum() -> Pendulum {
    Pendulum::new(PendulumParams::default(), domain(), Hyperbox::cube(1, -6.0, 6.0).unwrap()).unwrap()
}

fn expert_cpwa(eta: f64) -> GridCpwa {
    let expert = ExpertController::pendulum_default();
    let partition = Partition::new(domain(), eta, 0.5).unwrap();
    GridCpwa::build(&expert, partition, None).unwrap().0
}

fn sup_error_sweep(c: &mut Criterion) {
    let expert = ExpertController::pendulum_default();
    let cpwa = expert_cpwa(0.25);
    let mut g = c.benchmark_group("sup_error");
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| black_box(sup_error(&cpwa, &expert, 100_000, 0, exec)))
        });
    }
    g.finish();
}

fn plant_bounds_sweep(c: &mut Criterion) {
    let sys = pendulum();
    let mut g = c.benchmark_group("estimate_bounds");
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| black_box(estimate_bounds(&sys, 101, 1.0, exec).unwrap()))
        });
    }
    g.finish();
}

fn lipschitz_sweep(c: &mut Criterion) {
    let expert = ExpertController::pendulum_default();
    let mut g = c.benchmark_group("measure_lipschitz");
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| black_box(measure_lipschitz(&expert, &domain(), 201, FD_STEP, exec)))
        });
    }
    g.finish();
}

fn lattice_build(c: &mut Criterion) {
    let pieces = expert_cpwa(1.0).enumerate_pieces().unwrap();
    let mut g = c.benchmark_group("lattice_from_pieces");
    g.sample_size(10);
    for (name, exec) in MODES {
        let opts = FromPiecesOptions { exec, ..Default::default() };
        g.bench_with_input(BenchmarkId::from_parameter(name), &opts, |b, opts| {
            b.iter(|| black_box(TllNetwork::from_pieces(&pieces, opts).unwrap()))
        });
    }
    g.finish();
}

criterion_group!(benches, sup_error_sweep, plant_bounds_sweep, lipschitz_sweep, lattice_build);
criterion_main!(benches);
