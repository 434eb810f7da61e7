//! Seeded experiment drivers behind the command-line tool.
//!
//! Every driver is deterministic in its settings and seed. Trials run on the
//! rayon pool with per-trial seed `seed ^ trial` and are reduced in trial
//! order, so outputs are byte-identical across runs and thread counts.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{default_horizon, estimate, EstimationMethod, EstimationOptions};
use crate::feedback::{
    closed_loop_run, gain_feasibility, ClosedLoopRun, ControllerConfig, ConvexSet, CostModel, GainFeasibility,
    OutputBox, QuadraticCost,
};
use crate::linalg;
use crate::lti::{seeded_rng, DisturbanceKind, DisturbanceProcess, LtiSystem, SystemDims, Trajectory};
use crate::rideshare::{run_policy_comparison, PolicyComparison, RideshareScenario};
use crate::signal::{csv_to_error, Signal};
use crate::tracking::{
    compute_tracking_constants, empirical_tracking_error, gradient_error_sample, stable_optimizer_quadratic,
    tracking_bound_sequence, BoundTerms, EmpiricalError, ExpectationOracle, StableOptimizerRecord, TrackingConstants,
};

/// Per-trial seed.
pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    seed ^ trial as u64
}

fn is_skippable(e: &Error) -> bool {
    matches!(
        e,
        Error::NotPersistentlyExciting { .. } | Error::InfeasibleConstraints { .. } | Error::Structural(_)
    )
}

// ---------------------------------------------------------------------------
// Monte Carlo precision of Ĝ

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonteCarloSettings {
    pub sizes: Vec<usize>,
    #[serde(skip)]
    pub trials: usize,
    #[serde(skip)]
    pub seed: u64,
    /// Half-width of the i.i.d. uniform training disturbance.
    pub noise_scale: f64,
    pub method: EstimationMethod,
    /// Spectral radius of `A` is drawn uniformly from this range.
    pub radius: (f64, f64),
    /// Steps of the long-run simulation used for the prediction error.
    pub prediction_horizon: usize,
}

impl Default for MonteCarloSettings {
    fn default() -> Self {
        Self {
            sizes: vec![2, 5, 10],
            trials: 100,
            seed: 0,
            noise_scale: 1.0,
            method: EstimationMethod::ExactKnownNoise,
            radius: (0.3, 0.9),
            prediction_horizon: 400,
        }
    }
}

impl MonteCarloSettings {
    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.sizes.is_empty() || self.sizes.iter().any(|&n| n == 0 || n > 30) {
            return Err(Error::Config("sizes must be nonempty and within 1..=30".into()));
        }
        if !(self.noise_scale >= 0.0) {
            return Err(Error::Config("noise_scale must be nonnegative".into()));
        }
        let (lo, hi) = self.radius;
        if !(lo >= 0.0 && lo <= hi && hi < 1.0) {
            return Err(Error::Config("radius range must satisfy 0 ≤ lo ≤ hi < 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonteCarloRow {
    pub n: usize,
    pub trials: usize,
    pub skipped: usize,
    /// Mean `‖Ĝ - G‖_F` over the trials that ran.
    pub mean_error: f64,
    /// Mean `‖y_H - Ĝū‖` after a long run with constant `ū = 1`, `w = 0`.
    pub mean_prediction_error: f64,
}

/// One trial: `(‖Ĝ - G‖_F, prediction error)`, or `None` when the data were
/// not informative enough.
pub fn montecarlo_trial(n: usize, seed: u64, s: &MonteCarloSettings) -> Result<Option<(f64, f64)>> {
    let mut rng = seeded_rng(seed);
    let sys = LtiSystem::random(SystemDims { n, m: 1, p: 1, r: 1 }, s.radius, &mut rng)?;
    let nu = match sys.structural_indices() {
        Ok(ix) => ix.observability,
        Err(e) if is_skippable(&e) => return Ok(None),
        Err(e) => return Err(e),
    };
    let len = default_horizon(n, 1, 1, nu);
    let u = Signal::from_matrix(DMatrix::from_fn(1, len, |_, _| rng.sample::<f64, _>(StandardNormal)));
    let w = match s.method {
        EstimationMethod::ConstantNoise => {
            let level = s.noise_scale * rng.random_range(-1.0..=1.0);
            Signal::from_matrix(DMatrix::from_element(1, len, level))
        }
        _ => Signal::from_matrix(DMatrix::from_fn(1, len, |_, _| {
            s.noise_scale * rng.random_range(-1.0..=1.0)
        })),
    };
    let x0 = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let traj = sys.simulate_signals(&x0, &u, &w, len)?;
    let opts = EstimationOptions::new(nu).with_excitation_order(n + nu);
    let est = match estimate(s.method, &traj.u, &traj.y, Some(&traj.w), &opts) {
        Ok(est) => est,
        Err(e) if is_skippable(&e) => return Ok(None),
        Err(e) => return Err(e),
    };
    let g = sys.transfer_closed_form()?.g;
    let error = (&est.g_hat - &g).norm();

    let u_bar = DVector::from_element(1, 1.0);
    let long = sys.simulate_signals(
        &DVector::zeros(n),
        &Signal::constant(&u_bar, s.prediction_horizon),
        &Signal::zeros(1, s.prediction_horizon),
        s.prediction_horizon,
    )?;
    let y_end = long.y.sample(s.prediction_horizon - 1).into_owned();
    let prediction = (y_end - &est.g_hat * u_bar).norm();
    Ok(Some((error, prediction)))
}

pub fn run_montecarlo_g(s: &MonteCarloSettings) -> Result<Vec<MonteCarloRow>> {
    s.validate()?;
    let mut rows = Vec::with_capacity(s.sizes.len());
    for &n in &s.sizes {
        let results: Vec<Option<(f64, f64)>> = (0..s.trials)
            .into_par_iter()
            .map(|t| montecarlo_trial(n, trial_seed(s.seed, t), s))
            .collect::<Result<_>>()?;
        let ran: Vec<(f64, f64)> = results.iter().flatten().copied().collect();
        let skipped = s.trials - ran.len();
        if skipped > 0 {
            log::warn!(
                "n = {n}: skipped {skipped} of {} trials (uninformative data or numerically unobservable plant)",
                s.trials
            );
        }
        let count = ran.len().max(1) as f64;
        rows.push(MonteCarloRow {
            n,
            trials: ran.len(),
            skipped,
            mean_error: ran.iter().map(|r| r.0).sum::<f64>() / count,
            mean_prediction_error: ran.iter().map(|r| r.1).sum::<f64>() / count,
        });
    }
    Ok(rows)
}

/// `n,trials,skipped,mean_error,mean_prediction_error`
pub fn write_montecarlo_csv<W: Write>(rows: &[MonteCarloRow], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["n", "trials", "skipped", "mean_error", "mean_prediction_error"])
        .map_err(csv_to_error)?;
    for r in rows {
        wtr.write_record(&[
            r.n.to_string(),
            r.trials.to_string(),
            r.skipped.to_string(),
            r.mean_error.to_string(),
            r.mean_prediction_error.to_string(),
        ])
        .map_err(csv_to_error)?;
    }
    wtr.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Tracking of the time-varying stable optimizer

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackingSettings {
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub r: usize,
    /// `A` is this multiple of a random orthogonal matrix.
    pub radius: f64,
    pub horizon: usize,
    /// Disturbance levels are drawn from `[-level, level]` every `dwell` steps.
    pub level: f64,
    pub dwell: usize,
    /// Half-width of the i.i.d. jitter around the level.
    pub jitter: f64,
    pub kappa: f64,
    /// Controller step; chosen to minimize `max(β₁, β₂)` when absent.
    pub eta: Option<f64>,
    /// Half-width of the training disturbance used to estimate `Ĝ`.
    pub training_noise: f64,
    pub system_seed: u64,
    pub y_ref: Vec<f64>,
    /// Radius of the output box over which `ℓ` is evaluated.
    pub output_radius: f64,
}

impl Default for TrackingSettings {
    fn default() -> Self {
        Self {
            n: 3,
            m: 2,
            p: 2,
            r: 2,
            radius: 0.6,
            horizon: 200,
            level: 1.0,
            dwell: 40,
            jitter: 0.1,
            kappa: 0.5,
            eta: None,
            training_noise: 1e-3,
            system_seed: 42,
            y_ref: vec![1.0, -0.5],
            output_radius: 10.0,
        }
    }
}

impl TrackingSettings {
    /// Constant disturbance, no jitter: the homogeneous case.
    pub fn noiseless(mut self) -> Self {
        self.jitter = 0.0;
        self.dwell = self.horizon + 1;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 || self.p == 0 || self.r == 0 {
            return Err(Error::Config("tracking dimensions must be positive".into()));
        }
        if !(self.radius > 0.0 && self.radius < 1.0) {
            return Err(Error::Config("radius must lie in (0, 1)".into()));
        }
        if self.horizon < 2 || self.dwell == 0 {
            return Err(Error::Config("horizon must be at least 2 and dwell positive".into()));
        }
        if self.y_ref.len() != self.p {
            return Err(Error::Config(format!("y_ref must have {} entries", self.p)));
        }
        if !(self.level >= 0.0 && self.jitter >= 0.0 && self.training_noise >= 0.0) {
            return Err(Error::Config(
                "level, jitter and training_noise must be nonnegative".into(),
            ));
        }
        Ok(())
    }

    fn disturbance(&self, seed: u64) -> DisturbanceProcess {
        DisturbanceProcess::new(
            DisturbanceKind::PiecewiseConstant {
                lower: vec![-self.level; self.r],
                upper: vec![self.level; self.r],
                dwell: self.dwell,
                jitter: (self.jitter > 0.0).then(|| vec![self.jitter; self.r]),
            },
            seed,
        )
    }
}

/// Plant, cost and controller of the tracking study.
#[derive(Debug, Clone)]
pub struct TrackingScenario {
    pub system: LtiSystem,
    pub cost: QuadraticCost,
    pub controller: ControllerConfig,
    pub feasibility: GainFeasibility,
    pub constants: TrackingConstants,
}

fn random_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    g.qr().q()
}

fn unit_norm_gaussian<R: Rng + ?Sized>(rows: usize, cols: usize, scale: f64, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal));
    let norm = linalg::spectral_norm(&g);
    g * (scale / norm)
}

/// `η` in the admissible interval minimizing `max(β₁, β₂)` on a grid.
fn pick_eta(feas: &GainFeasibility, mu: f64, c_norm: f64) -> Result<f64> {
    let Some(iv) = feas.interval else {
        return Err(Error::InfeasibleGain(feas.violations.join("; ")));
    };
    let mut best = (f64::INFINITY, iv.midpoint());
    for i in 1..200 {
        let eta = iv.lower + (iv.upper - iv.lower) * i as f64 / 200.0;
        let b1 = crate::tracking::beta1(eta, mu, feas.ell_hat, feas.mismatch);
        let b2 = feas.rho_x + eta * feas.ell_hat * c_norm;
        let rate = b1.max(b2);
        if rate < best.0 {
            best = (rate, eta);
        }
    }
    Ok(best.1)
}

impl TrackingScenario {
    pub fn build(s: &TrackingSettings) -> Result<Self> {
        s.validate()?;
        let mut rng = seeded_rng(s.system_seed);
        let a = random_orthogonal(s.n, &mut rng) * s.radius;
        let b = unit_norm_gaussian(s.n, s.m, 1.0, &mut rng);
        let c = unit_norm_gaussian(s.p, s.n, 1.0, &mut rng);
        let d = unit_norm_gaussian(s.p, s.r, 0.5, &mut rng);
        let e = unit_norm_gaussian(s.n, s.r, 0.5, &mut rng);
        let system = LtiSystem::new(a, b, c, d, e)?;

        // Ĝ from a short, lightly disturbed experiment
        let nu = system.structural_indices()?.observability;
        let len = 2 * default_horizon(s.n, s.m, s.r, nu);
        let u = Signal::from_matrix(DMatrix::from_fn(s.m, len, |_, _| rng.sample::<f64, _>(StandardNormal)));
        let train_w = DisturbanceProcess::iid_box(&vec![0.0; s.r], &vec![s.training_noise; s.r], rng.random());
        let traj = system.simulate(&DVector::zeros(s.n), &u, &train_w, len)?;
        let opts = EstimationOptions::new(nu).with_excitation_order(s.n + nu);
        let g_hat = estimate(EstimationMethod::MinNormUnknownNoise, &traj.u, &traj.y, None, &opts)?.g_hat;

        let cost = QuadraticCost::new(
            DMatrix::identity(s.m, s.m),
            DVector::from_column_slice(&s.y_ref),
            OutputBox::symmetric(s.p, s.output_radius),
        )?;
        let cert = system.solve_discrete_lyapunov(&DMatrix::identity(s.n, s.n))?;
        let g = system.transfer_closed_form()?.g;
        let mismatch = linalg::spectral_norm(&(&g - &g_hat));
        let c_norm = linalg::spectral_norm(system.c());
        let cc = cost.constants();
        let feasibility = gain_feasibility(&cc, &g_hat, mismatch, c_norm, &cert, s.kappa)?;
        let eta = match s.eta {
            Some(eta) => eta,
            None => pick_eta(&feasibility, cc.mu, c_norm)?,
        };
        feasibility.require(eta)?;
        let controller = ControllerConfig::new(eta, g_hat, ConvexSet::WholeSpace, s.horizon)?;
        let constants = compute_tracking_constants(&controller, &cc, &system, &cert, s.kappa)?;
        Ok(Self {
            system,
            cost,
            controller,
            feasibility,
            constants,
        })
    }
}

#[derive(Debug, Clone)]
pub struct TrackingReport {
    pub constants: TrackingConstants,
    pub empirical: EmpiricalError,
    pub bound: Vec<BoundTerms>,
    pub trials: usize,
}

impl TrackingReport {
    /// `k,empirical_error,bound,beta1,beta2`
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["k", "empirical_error", "bound", "beta1", "beta2"])
            .map_err(csv_to_error)?;
        for (k, (e, b)) in self.empirical.mean.iter().zip(&self.bound).enumerate() {
            wtr.write_record(&[
                k.to_string(),
                e.to_string(),
                b.total().to_string(),
                self.constants.beta1.to_string(),
                self.constants.beta2.to_string(),
            ])
            .map_err(csv_to_error)?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// `k,input,state,gradient_noise,input_drift,state_drift,std_error`
    pub fn write_terms_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record([
            "k",
            "input",
            "state",
            "gradient_noise",
            "input_drift",
            "state_drift",
            "std_error",
        ])
        .map_err(csv_to_error)?;
        for (k, (b, se)) in self.bound.iter().zip(&self.empirical.std_error).enumerate() {
            wtr.write_record(&[
                k.to_string(),
                b.input.to_string(),
                b.state.to_string(),
                b.gradient_noise.to_string(),
                b.input_drift.to_string(),
                b.state_drift.to_string(),
                se.to_string(),
            ])
            .map_err(csv_to_error)?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Largest `e_{k+1}/e_k` for `k ≥ from` while `e_k` stays above `floor`.
    pub fn worst_decay_factor(&self, from: usize, floor: f64) -> f64 {
        let e = &self.empirical.mean;
        (from..e.len().saturating_sub(1))
            .take_while(|&k| e[k] > floor)
            .map(|k| e[k + 1] / e[k])
            .fold(0.0, f64::max)
    }
}

struct TrackingTrial {
    run: ClosedLoopRun,
    oracle: Vec<StableOptimizerRecord>,
    gradient_error: Vec<f64>,
}

fn tracking_trial(sc: &TrackingScenario, s: &TrackingSettings, seed: u64) -> Result<TrackingTrial> {
    let sys = &sc.system;
    let w = s.disturbance(seed);
    let means = w.realize(s.horizon)?.means;
    let run = closed_loop_run(
        sys,
        &w,
        &sc.controller,
        &sc.cost,
        &DVector::zeros(sys.n()),
        &DVector::zeros(sys.m()),
    )?;
    let mut oracle = Vec::with_capacity(s.horizon + 1);
    let mut gradient_error = Vec::with_capacity(s.horizon);
    for k in 0..s.horizon {
        let w_bar = means.sample(k).into_owned();
        oracle.push(stable_optimizer_quadratic(
            &sc.cost,
            k,
            &sc.controller.g_hat,
            sys,
            &w_bar,
        )?);
        let Trajectory { u, x, y, .. } = &run.trajectory;
        let y_mean = sys.c() * x.sample(k) + sys.d() * &w_bar;
        let e = gradient_error_sample(
            k,
            &u.sample(k).into_owned(),
            &y.sample(k).into_owned(),
            &sc.controller.g_hat,
            &sc.cost,
            &ExpectationOracle::PointMass(y_mean),
        )?;
        gradient_error.push(e.norm());
    }
    Ok(TrackingTrial {
        run,
        oracle,
        gradient_error,
    })
}

/// Empirical mean tracking error over `trials` seeds against the bound
/// recursion driven by seed-averaged noise and drift statistics.
pub fn run_tracking(s: &TrackingSettings, seed: u64, trials: usize) -> Result<TrackingReport> {
    if trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    let sc = TrackingScenario::build(s)?;
    let results: Vec<TrackingTrial> = (0..trials)
        .into_par_iter()
        .map(|t| tracking_trial(&sc, s, trial_seed(seed, t)))
        .collect::<Result<_>>()?;

    let pairs: Vec<(&ClosedLoopRun, &[StableOptimizerRecord])> =
        results.iter().map(|r| (&r.run, r.oracle.as_slice())).collect();
    let empirical = empirical_tracking_error(&pairs)?;

    let count = trials as f64;
    let h = s.horizon;
    let mut gradient_error = vec![0.0; h];
    let mut input_drift = vec![0.0; h - 1];
    let mut state_drift_sup = 0.0;
    let mut eu0 = 0.0;
    let mut ex0 = 0.0;
    for r in &results {
        for (acc, v) in gradient_error.iter_mut().zip(&r.gradient_error) {
            *acc += v / count;
        }
        let mut sup: f64 = 0.0;
        for (acc, pair) in input_drift.iter_mut().zip(r.oracle.windows(2)) {
            *acc += (&pair[1].u_so - &pair[0].u_so).norm() / count;
            sup = sup.max((&pair[1].x_so - &pair[0].x_so).norm());
        }
        state_drift_sup += sup / count;
        eu0 += (r.run.trajectory.u.sample(0) - &r.oracle[0].u_so).norm() / count;
        ex0 += (r.run.trajectory.x.sample(0) - &r.oracle[0].x_so).norm() / count;
    }
    let bound = tracking_bound_sequence(
        &sc.constants,
        eu0,
        ex0,
        &gradient_error,
        &input_drift,
        state_drift_sup,
        h - 1,
    );
    Ok(TrackingReport {
        constants: sc.constants,
        empirical,
        bound,
        trials,
    })
}

// ---------------------------------------------------------------------------
// Ride-service pricing

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RideshareSettings {
    pub demand_noise: f64,
    pub travel_min: usize,
    pub travel_max: usize,
    pub rho: f64,
    pub markup: f64,
    pub eta: Option<f64>,
    pub eps_mu: f64,
    /// Synthetic day; ignored when a demand CSV is supplied.
    pub day: crate::rideshare::SyntheticDay,
}

impl Default for RideshareSettings {
    fn default() -> Self {
        let sc = RideshareScenario::synthetic_default().expect("default scenario is valid");
        Self {
            demand_noise: sc.demand_noise,
            travel_min: sc.travel_min,
            travel_max: sc.travel_max,
            rho: sc.rho,
            markup: sc.markup,
            eta: sc.eta,
            eps_mu: sc.eps_mu,
            day: crate::rideshare::SyntheticDay::default(),
        }
    }
}

impl RideshareSettings {
    /// Scenario on the default graph, or on `graph`/`demand` when given.
    pub fn scenario(
        &self,
        graph: Option<crate::rideshare::RegionGraph>,
        demand: Option<crate::rideshare::DemandProfile>,
    ) -> Result<RideshareScenario> {
        let mut sc = RideshareScenario::synthetic_default()?;
        if let Some(g) = graph {
            sc.graph = g;
        }
        sc.demand = match demand {
            Some(d) => d,
            None => self.day.generate()?,
        };
        sc.demand_noise = self.demand_noise;
        sc.travel_min = self.travel_min;
        sc.travel_max = self.travel_max;
        sc.rho = self.rho;
        sc.markup = self.markup;
        sc.eta = self.eta;
        sc.eps_mu = self.eps_mu;
        Ok(sc)
    }
}

pub fn run_rideshare(sc: &RideshareScenario, seed: u64, seeds: usize) -> Result<PolicyComparison> {
    if seeds == 0 {
        return Err(Error::Config("seeds must be at least 1".into()));
    }
    let list: Vec<u64> = (0..seeds).map(|t| trial_seed(seed, t)).collect();
    run_policy_comparison(sc, &list)
}

// ---------------------------------------------------------------------------
// Open-loop simulation

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulateSettings {
    pub horizon: usize,
    pub x0: Option<Vec<f64>>,
    /// Disturbance law; zero when absent.
    pub disturbance: Option<DisturbanceProcess>,
    /// Constant input when no input file is given.
    pub input: Option<Vec<f64>>,
}

impl Default for SimulateSettings {
    fn default() -> Self {
        Self {
            horizon: 100,
            x0: None,
            disturbance: None,
            input: None,
        }
    }
}

/// Open-loop run of `sys` from the settings; `u` overrides the constant input.
pub fn run_simulate(sys: &LtiSystem, s: &SimulateSettings, u: Option<Signal>, seed: u64) -> Result<Trajectory> {
    if s.horizon == 0 {
        return Err(Error::Config("horizon must be at least 1".into()));
    }
    let x0 = match &s.x0 {
        Some(v) => DVector::from_column_slice(v),
        None => DVector::zeros(sys.n()),
    };
    let u = match u {
        Some(u) => u,
        None => {
            let level = match &s.input {
                Some(v) => DVector::from_column_slice(v),
                None => DVector::zeros(sys.m()),
            };
            Signal::constant(&level, s.horizon)
        }
    };
    let w = match &s.disturbance {
        Some(d) => {
            let mut d = d.clone();
            d.seed ^= seed;
            d
        }
        None => DisturbanceProcess::zero(sys.r()),
    };
    sys.simulate(&x0, &u, &w, s.horizon)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_sweep_is_exact_without_noise() {
        let s = MonteCarloSettings {
            sizes: vec![1],
            trials: 5,
            noise_scale: 0.0,
            ..Default::default()
        };
        let rows = run_montecarlo_g(&s).unwrap();
        assert_eq!(rows[0].skipped, 0);
        assert!(rows[0].mean_error <= 1e-10);
        assert!(rows[0].mean_prediction_error <= 1e-10);
    }

    #[test]
    fn montecarlo_csv_is_deterministic() {
        let s = MonteCarloSettings {
            sizes: vec![2, 3],
            trials: 4,
            seed: 9,
            ..Default::default()
        };
        let csv = |s: &MonteCarloSettings| {
            let mut buf = Vec::new();
            write_montecarlo_csv(&run_montecarlo_g(s).unwrap(), &mut buf).unwrap();
            buf
        };
        assert_eq!(csv(&s), csv(&s));
        let text = String::from_utf8(csv(&s)).unwrap();
        assert!(text.starts_with("n,trials,skipped,mean_error,mean_prediction_error\n2,"));
    }

    #[test]
    fn tracking_scenario_is_feasible() {
        let sc = TrackingScenario::build(&TrackingSettings::default()).unwrap();
        assert!(sc.constants.beta1 < 1.0 && sc.constants.beta2 < 1.0);
        assert!(sc.feasibility.is_feasible());
    }

    #[test]
    fn infeasible_eta_is_rejected() {
        let s = TrackingSettings {
            eta: Some(10.0),
            ..Default::default()
        };
        assert!(matches!(TrackingScenario::build(&s), Err(Error::InfeasibleGain(_))));
    }

    #[test]
    fn simulate_defaults_to_rest() {
        let sys = LtiSystem::scalar(0.5, 1.0, 1.0, 0.0, 0.0).unwrap();
        let traj = run_simulate(&sys, &SimulateSettings::default(), None, 0).unwrap();
        assert!(traj.y.as_matrix().iter().all(|v| *v == 0.0));
        let s = SimulateSettings {
            input: Some(vec![1.0]),
            ..Default::default()
        };
        let traj = run_simulate(&sys, &s, None, 0).unwrap();
        assert!((traj.y.sample(99)[0] - 2.0).abs() < 1e-12);
    }
}
