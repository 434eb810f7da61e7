//! Seeded inputs shared by the benchmarks.

use feedopt::estimation::default_horizon;
use feedopt::lti::{seeded_rng, SystemDims};
use feedopt::{LtiSystem, Signal, Trajectory};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// A training run long enough for exact recovery.
pub struct TrainingData {
    pub system: LtiSystem,
    pub nu: usize,
    pub trajectory: Trajectory,
}

/// Random single-input plant of order `n` driven by uniform input and noise.
pub fn training_data(n: usize, seed: u64) -> TrainingData {
    let mut rng = seeded_rng(seed);
    let dims = SystemDims { n, m: 1, p: 1, r: 1 };
    let system = LtiSystem::random(dims, (0.5, 0.9), &mut rng).expect("random plant");
    let nu = system.structural_indices().expect("observable plant").observability;
    let len = default_horizon(n, 1, 1, nu);
    let mut uniform =
        |rows: usize| Signal::from_matrix(DMatrix::from_fn(rows, len, |_, _| rng.random_range(-1.0..=1.0)));
    let u = uniform(1);
    let w = uniform(1);
    let trajectory = system
        .simulate_signals(&DVector::zeros(n), &u, &w, len)
        .expect("simulation");
    TrainingData { system, nu, trajectory }
}

/// Schur-stable `n × n` matrix with spectral radius `radius`.
pub fn stable_matrix(n: usize, radius: f64, seed: u64) -> DMatrix<f64> {
    let mut rng = seeded_rng(seed);
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..=1.0));
    let rho = feedopt::linalg::spectral_radius(&a);
    a * (radius / rho)
}
