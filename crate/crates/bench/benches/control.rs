use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use feedopt::experiments::{TrackingScenario, TrackingSettings};
use feedopt::feedback::closed_loop_run;
use feedopt::rideshare::{run_policy, PolicyKind, RideshareScenario};
use feedopt::{DisturbanceProcess, LtiSystem};
use feedopt_bench::stable_matrix;
use nalgebra::{DMatrix, DVector};
use std::hint::black_box;

fn bench_lyapunov(c: &mut Criterion) {
    let mut group = c.benchmark_group("lyapunov");
    for n in [5, 20, 50] {
        let a = stable_matrix(n, 0.95, 3);
        let sys = LtiSystem::new(
            a,
            DMatrix::zeros(n, 1),
            DMatrix::zeros(1, n),
            DMatrix::zeros(1, 1),
            DMatrix::zeros(n, 1),
        )
        .unwrap();
        let q = DMatrix::identity(n, n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| sys.solve_discrete_lyapunov(black_box(&q)).unwrap())
        });
    }
    group.finish();
}

fn bench_closed_loop(c: &mut Criterion) {
    let sc = TrackingScenario::build(&TrackingSettings::default()).unwrap();
    let w = DisturbanceProcess::iid_box(&[0.0, 0.0], &[0.1, 0.1], 5);
    let x0 = DVector::zeros(sc.system.n());
    let u0 = DVector::zeros(sc.system.m());
    c.bench_function("closed_loop_200_steps", |b| {
        b.iter(|| closed_loop_run(&sc.system, black_box(&w), &sc.controller, &sc.cost, &x0, &u0).unwrap())
    });
}

fn bench_rideshare_day(c: &mut Criterion) {
    let sc = RideshareScenario::synthetic_default().unwrap();
    let mut group = c.benchmark_group("rideshare_day");
    for policy in [PolicyKind::Adaptive, PolicyKind::FixedMarkup] {
        group.bench_function(policy.as_str(), |b| {
            b.iter(|| run_policy(&sc, policy, black_box(1)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_lyapunov, bench_closed_loop, bench_rideshare_day);
criterion_main!(benches);
