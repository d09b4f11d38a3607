use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mathonet::benchmarks::{generate_dataset, SystemSpec};
use mathonet::grad::gauss_newton_diag;
use mathonet::par::Exec;
use mathonet::trainer::{discover, TrainConfig};
use mathonet::validation::mc_uncertainty;
use mathonet::{MathONet, Model, UnaryKind};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn execs() -> [(&'static str, Exec); 2] {
    [("sequential", Exec::sequential()), ("parallel", Exec::default())]
}

fn lorenz_net() -> MathONet {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    MathONet::random(3, &[3], &UnaryKind::ALL, 0.5, &mut rng)
}

fn restarts(c: &mut Criterion) {
    let data = generate_dataset(&SystemSpec::lotka_volterra(), 0.0, 0).unwrap();
    let cfg = TrainConfig {
        n_cycle: 3,
        n_epoch: 20,
        decay_every: 20,
        restarts: 4,
        lambda_grid: vec![1e-3, 1e-4],
        ..TrainConfig::lotka_volterra()
    };
    let mut group = c.benchmark_group("restart_sweep");
    group.sample_size(10);
    for (name, exec) in execs() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| discover(black_box(&data), 0, &cfg, &exec).unwrap())
        });
    }
    group.finish();
}

fn curvature(c: &mut Criterion) {
    let data = generate_dataset(&SystemSpec::lorenz(), 0.0, 0).unwrap();
    let net = lorenz_net();
    let mut group = c.benchmark_group("gauss_newton_diag");
    for (name, exec) in execs() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| gauss_newton_diag(black_box(&net), &data.x, 1.0, &exec))
        });
    }
    group.finish();
}

fn monte_carlo(c: &mut Criterion) {
    let data = generate_dataset(&SystemSpec::lorenz(), 0.0, 0).unwrap();
    let net = lorenz_net();
    let zeta = vec![1e-4; net.params().len()];
    let mut group = c.benchmark_group("mc_uncertainty");
    group.sample_size(10);
    for (name, exec) in execs() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| mc_uncertainty(black_box(&net), &zeta, &data.x, 200, 0, &exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, restarts, curvature, monte_carlo);
criterion_main!(benches);
