//! Stable optimizers and tracking certificates for the feedback controller.
//!
//! With a gain estimate `Ĝ`, the controller implicitly minimizes the cost under
//! the output law it induces itself. Its fixed point `u^so` (the stable
//! optimizer) differs from the true minimizer `u*` by at most
//! `2ℓ‖G-Ĝ‖/(μ σ_min(Ĝ)²)`, and the closed loop tracks `(u^so_k, x^so_k)` up to
//! the recursion in [`tracking_bound_sequence`].

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::feedback::{
    state_contraction, ClosedLoopRun, ControllerConfig, ConvexSet, CostConstants, CostModel, QuadraticCost,
};
use crate::linalg;
use crate::lti::{LtiSystem, LyapunovCertificate};

/// Stopping tolerance of the repeated-retraining iteration.
pub const RETRAINING_TOL: f64 = 1e-9;
/// Iteration cap of the repeated-retraining iteration.
pub const RETRAINING_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct StableOptimizerRecord {
    pub u_so: DVector<f64>,
    pub x_so: DVector<f64>,
    pub k: usize,
    /// Residual of the stationarity condition at `u_so`.
    pub residual: f64,
}

fn check_gain_shapes(g_hat: &DMatrix<f64>, g: &DMatrix<f64>, h: &DMatrix<f64>, w_bar: &DVector<f64>) -> Result<()> {
    if g.shape() != g_hat.shape() {
        return Err(Error::dimension(
            "G",
            format!("{}x{}", g_hat.nrows(), g_hat.ncols()),
            format!("{}x{}", g.nrows(), g.ncols()),
        ));
    }
    if h.nrows() != g.nrows() || h.ncols() != w_bar.len() {
        return Err(Error::dimension(
            "H",
            format!("{}x{}", g.nrows(), w_bar.len()),
            format!("{}x{}", h.nrows(), h.ncols()),
        ));
    }
    Ok(())
}

fn solve_spd_like(lhs: &DMatrix<f64>, rhs: &DVector<f64>, what: &str) -> Result<(DVector<f64>, f64)> {
    let cond = linalg::condition_number(lhs);
    if !cond.is_finite() || cond > 1e14 {
        return Err(Error::Numerical(format!(
            "{what} system is singular (condition {cond:.3e})"
        )));
    }
    let u = linalg::lu_solve_vec(lhs, rhs)?;
    let residual = (lhs * &u - rhs).norm();
    Ok((u, residual))
}

/// Unconstrained stable optimizer of `½uᵀQ_u u + ½‖y - y_ref‖²` when the
/// controller models `y = Ĝu + z` and the true law is `y = Gu + Hw̄`:
/// `(Q_u + ĜᵀG) u = Ĝᵀ(y_ref - Hw̄)`.
pub fn stable_input_quadratic(
    q_u: &DMatrix<f64>,
    y_ref: &DVector<f64>,
    g_hat: &DMatrix<f64>,
    g: &DMatrix<f64>,
    h: &DMatrix<f64>,
    w_bar: &DVector<f64>,
) -> Result<(DVector<f64>, f64)> {
    check_gain_shapes(g_hat, g, h, w_bar)?;
    let lhs = q_u + g_hat.transpose() * g;
    let rhs = g_hat.transpose() * (y_ref - h * w_bar);
    solve_spd_like(&lhs, &rhs, "stable-optimizer")
}

/// Stable optimizer and its steady state `x^so = (I-A)^{-1}(B u^so + E w̄)`.
pub fn stable_optimizer_quadratic(
    cost: &QuadraticCost,
    k: usize,
    g_hat: &DMatrix<f64>,
    sys: &LtiSystem,
    w_bar: &DVector<f64>,
) -> Result<StableOptimizerRecord> {
    let tf = sys.transfer_closed_form()?;
    let (u_so, residual) = stable_input_quadratic(cost.q_u(), cost.y_ref(k), g_hat, &tf.g, &tf.h, w_bar)?;
    let x_so = sys.equilibrium_state(&u_so, w_bar)?.x;
    Ok(StableOptimizerRecord {
        u_so,
        x_so,
        k,
        residual,
    })
}

/// `u* = argmin ½uᵀQ_u u + ½‖Gu + Hw̄ - y_ref‖²`.
pub fn true_optimizer_quadratic(
    q_u: &DMatrix<f64>,
    y_ref: &DVector<f64>,
    g: &DMatrix<f64>,
    h: &DMatrix<f64>,
    w_bar: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_gain_shapes(g, g, h, w_bar)?;
    let lhs = q_u + g.transpose() * g;
    let rhs = g.transpose() * (y_ref - h * w_bar);
    solve_spd_like(&lhs, &rhs, "true-optimizer").map(|(u, _)| u)
}

/// Stable optimizer of a general cost by repeated retraining: freeze the
/// output law at the current decision, minimize the frozen problem over `U`,
/// and repeat until the decision moves less than [`RETRAINING_TOL`].
#[allow(clippy::too_many_arguments)]
pub fn stable_optimizer_retraining<C: CostModel + ?Sized>(
    cost: &C,
    k: usize,
    g_hat: &DMatrix<f64>,
    g: &DMatrix<f64>,
    h: &DMatrix<f64>,
    w_bar: &DVector<f64>,
    constraint: &ConvexSet,
    u0: &DVector<f64>,
) -> Result<(DVector<f64>, usize)> {
    check_gain_shapes(g_hat, g, h, w_bar)?;
    let c = cost.constants();
    let smooth = c.ell_u_grad + linalg::spectral_norm(g_hat).powi(2) * c.ell_y_grad;
    let step = 1.0 / smooth.max(c.mu);
    let mut u = constraint.project(u0)?;
    for outer in 0..RETRAINING_MAX_ITER {
        // frozen law: y = Ĝv + (G - Ĝ)u + Hw̄
        let z = (g - g_hat) * &u + h * w_bar;
        let mut v = u.clone();
        let mut converged = false;
        for _ in 0..RETRAINING_MAX_ITER {
            let y = g_hat * &v + &z;
            let grad = cost.grad_u(k, &v, &y) + g_hat.transpose() * cost.grad_y(k, &v, &y);
            let next = constraint.project(&(&v - grad * step))?;
            let delta = (&next - &v).norm();
            v = next;
            if delta <= 1e-13 * (1.0 + v.norm()) {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Numerical(
                "inner solve of the retraining iteration did not converge".into(),
            ));
        }
        let delta = (&v - &u).norm();
        u = v;
        if delta <= RETRAINING_TOL {
            return Ok((u, outer + 1));
        }
    }
    Err(Error::Numerical(format!(
        "repeated retraining did not converge in {RETRAINING_MAX_ITER} iterations"
    )))
}

/// `2ℓ‖G - Ĝ‖ / (μ σ_min(Ĝ)²)`.
pub fn optimizer_gap_bound(ell: f64, mu: f64, g: &DMatrix<f64>, g_hat: &DMatrix<f64>) -> Result<f64> {
    if g.shape() != g_hat.shape() {
        return Err(Error::dimension(
            "G",
            format!("{}x{}", g_hat.nrows(), g_hat.ncols()),
            format!("{}x{}", g.nrows(), g.ncols()),
        ));
    }
    if !(mu > 0.0) {
        return Err(Error::InvalidArgument(format!("μ must be positive, got {mu}")));
    }
    let sigma = if g_hat.nrows() < g_hat.ncols() {
        0.0
    } else {
        linalg::min_singular_value(g_hat)
    };
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument("Ĝ must have full column rank".into()));
    }
    Ok(2.0 * ell * linalg::spectral_norm(&(g - g_hat)) / (mu * sigma * sigma))
}

/// `‖G - Ĝ‖‖u - u'‖`, an upper bound on the Wasserstein-1 distance between
/// the output laws induced by `u` and `u'`.
pub fn wasserstein_shift_bound(g: &DMatrix<f64>, g_hat: &DMatrix<f64>, u: &DVector<f64>, u2: &DVector<f64>) -> f64 {
    linalg::spectral_norm(&(g - g_hat)) * (u - u2).norm()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrackingConstants {
    pub beta1: f64,
    pub beta2: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    pub kappa: f64,
    pub ell_hat: f64,
    /// Open-loop state factor, the first addend of `β₂`.
    pub rho_x: f64,
    /// Cross-coupling `ηℓ̂‖C‖`, the second addend of `β₂`.
    pub coupling: f64,
    pub mismatch: f64,
    pub eta: f64,
}

impl TrackingConstants {
    pub fn rate(&self) -> f64 {
        self.beta1.max(self.beta2)
    }
}

/// Input contraction factor `sqrt(1 - ημ) + ηℓ̂‖G - Ĝ‖`.
pub fn beta1(eta: f64, mu: f64, ell_hat: f64, mismatch: f64) -> f64 {
    (1.0 - eta * mu).max(0.0).sqrt() + eta * ell_hat * mismatch
}

/// Constants of the tracking certificate. Needs the true plant (audit mode).
pub fn compute_tracking_constants(
    cfg: &ControllerConfig,
    constants: &CostConstants,
    sys: &LtiSystem,
    cert: &LyapunovCertificate,
    kappa: f64,
) -> Result<TrackingConstants> {
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(Error::InvalidArgument(format!("κ must lie in (0, 1), got {kappa}")));
    }
    let eta = cfg.eta;
    let mu = constants.mu;
    if eta * mu > 1.0 {
        return Err(Error::InfeasibleGain(format!("η = {eta} exceeds 1/μ = {}", 1.0 / mu)));
    }
    let g = sys.transfer_closed_form()?.g;
    let mismatch = linalg::spectral_norm(&(&g - &cfg.g_hat));
    let ell_hat = constants.ell_hat(&cfg.g_hat);
    let c_norm = linalg::spectral_norm(sys.c());
    let rho_x = state_contraction(cert, kappa);
    let coupling = eta * ell_hat * c_norm;
    let at_p = linalg::spectral_norm(&(sys.a().transpose() * cert.p()));
    let kq = kappa * cert.q_min();
    Ok(TrackingConstants {
        beta1: beta1(eta, mu, ell_hat, mismatch),
        beta2: rho_x + coupling,
        gamma1: eta,
        gamma2: 1.0,
        gamma3: (2.0 * cert.p_max() / kq).sqrt().max(4.0 * at_p / kq),
        kappa,
        ell_hat,
        rho_x,
        coupling,
        mismatch,
        eta,
    })
}

/// One row of the bound recursion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundTerms {
    /// Input part `eᵘ_k`.
    pub input: f64,
    /// State part `eˣ_k`.
    pub state: f64,
    /// `γ₁ E‖e_{k-1}‖` added at this step.
    pub gradient_noise: f64,
    /// `γ₂ ‖u^so_k - u^so_{k-1}‖` added at this step.
    pub input_drift: f64,
    /// `γ₃ sup_t ‖x^so_{t+1} - x^so_t‖` added at this step.
    pub state_drift: f64,
}

impl BoundTerms {
    pub fn total(&self) -> f64 {
        self.input + self.state
    }
}

/// Iterate the tracking bound
///
/// ```text
/// eᵘ_{k+1} = β₁ eᵘ_k + ηℓ̂‖C‖ eˣ_k + γ₁ E‖e_k‖ + γ₂ ‖u^so_{k+1} - u^so_k‖
/// eˣ_{k+1} = ρ_x eˣ_k + γ₃ sup_drift
/// ```
///
/// so that `eᵘ + eˣ` follows `β₁ eᵘ + β₂ eˣ + …`. `gradient_error[k]` is
/// `E‖e_k‖` and `input_drift[k]` is `‖u^so_{k+1} - u^so_k‖`; missing trailing
/// entries count as zero. Returns `steps + 1` rows starting at `k = 0`.
pub fn tracking_bound_sequence(
    c: &TrackingConstants,
    initial_input_error: f64,
    initial_state_error: f64,
    gradient_error: &[f64],
    input_drift: &[f64],
    state_drift_sup: f64,
    steps: usize,
) -> Vec<BoundTerms> {
    let mut out = Vec::with_capacity(steps + 1);
    let mut row = BoundTerms {
        input: initial_input_error,
        state: initial_state_error,
        gradient_noise: 0.0,
        input_drift: 0.0,
        state_drift: 0.0,
    };
    out.push(row);
    for k in 0..steps {
        let gradient_noise = c.gamma1 * gradient_error.get(k).copied().unwrap_or(0.0);
        let drift_u = c.gamma2 * input_drift.get(k).copied().unwrap_or(0.0);
        let drift_x = c.gamma3 * state_drift_sup;
        row = BoundTerms {
            input: c.beta1 * row.input + c.coupling * row.state + gradient_noise + drift_u,
            state: c.rho_x * row.state + drift_x,
            gradient_noise,
            input_drift: drift_u,
            state_drift: drift_x,
        };
        out.push(row);
    }
    out
}

/// Per-step mean and standard error of `‖u_k - u^so_k‖ + ‖x_k - x^so_k‖`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalError {
    pub mean: Vec<f64>,
    pub std_error: Vec<f64>,
}

/// Mean tracking error over runs, each paired with its own oracle sequence.
/// Runs are reduced in the given order.
pub fn empirical_tracking_error(runs: &[(&ClosedLoopRun, &[StableOptimizerRecord])]) -> Result<EmpiricalError> {
    let Some((first, _)) = runs.first() else {
        return Err(Error::InvalidArgument("no runs to average".into()));
    };
    let horizon = first.trajectory.len();
    let mut sum = vec![0.0; horizon];
    let mut sum_sq = vec![0.0; horizon];
    for (run, oracle) in runs {
        if run.trajectory.len() != horizon {
            return Err(Error::dimension("run horizon", horizon, run.trajectory.len()));
        }
        if oracle.len() < horizon {
            return Err(Error::dimension("oracle length", format!(">= {horizon}"), oracle.len()));
        }
        for k in 0..horizon {
            let e = (run.trajectory.u.sample(k) - &oracle[k].u_so).norm()
                + (run.trajectory.x.sample(k) - &oracle[k].x_so).norm();
            sum[k] += e;
            sum_sq[k] += e * e;
        }
    }
    let n = runs.len() as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let std_error = sum_sq
        .iter()
        .zip(&mean)
        .map(|(sq, m)| {
            if runs.len() < 2 {
                0.0
            } else {
                ((sq / n - m * m).max(0.0) * n / (n - 1.0) / n).sqrt()
            }
        })
        .collect();
    Ok(EmpiricalError { mean, std_error })
}

/// How the conditional expectation of the output is known.
#[derive(Debug, Clone)]
pub enum ExpectationOracle {
    /// Deterministic output.
    PointMass(DVector<f64>),
    /// Finitely many outcomes with probabilities summing to one.
    FiniteSupport(Vec<(f64, DVector<f64>)>),
    /// Equally weighted draws from the output law.
    Samples(Vec<DVector<f64>>),
}

/// `e = ∇(u, y) - E[∇(u, Y)]` where `∇ = ∇_uφ + Ĝᵀ∇_yφ`.
pub fn gradient_error_sample<C: CostModel + ?Sized>(
    k: usize,
    u: &DVector<f64>,
    y: &DVector<f64>,
    g_hat: &DMatrix<f64>,
    cost: &C,
    oracle: &ExpectationOracle,
) -> Result<DVector<f64>> {
    let grad = |yy: &DVector<f64>| cost.grad_u(k, u, yy) + g_hat.transpose() * cost.grad_y(k, u, yy);
    let expected = match oracle {
        ExpectationOracle::PointMass(mean) => grad(mean),
        ExpectationOracle::FiniteSupport(outcomes) => {
            let total: f64 = outcomes.iter().map(|(p, _)| *p).sum();
            if outcomes.is_empty() || (total - 1.0).abs() > 1e-12 || outcomes.iter().any(|(p, _)| *p < 0.0) {
                return Err(Error::InvalidArgument(
                    "outcome probabilities must be nonnegative and sum to one".into(),
                ));
            }
            outcomes
                .iter()
                .fold(DVector::zeros(u.len()), |acc, (p, yy)| acc + grad(yy) * *p)
        }
        ExpectationOracle::Samples(draws) => {
            if draws.is_empty() {
                return Err(Error::InvalidArgument("sample-average oracle has no draws".into()));
            }
            draws.iter().fold(DVector::zeros(u.len()), |acc, yy| acc + grad(yy)) / draws.len() as f64
        }
    };
    Ok(grad(y) - expected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feedback::OutputBox;
    use crate::lti::{seeded_rng, SystemDims};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn m1(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }
    fn v1(v: f64) -> DVector<f64> {
        DVector::from_element(1, v)
    }

    #[test]
    fn scalar_optimizers_match_hand_solutions() {
        let (u_so, res) = stable_input_quadratic(&m1(1.0), &v1(1.0), &m1(1.0), &m1(1.2), &m1(0.0), &v1(0.0)).unwrap();
        assert_relative_eq!(u_so[0], 1.0 / 2.2, epsilon = 1e-12);
        assert!(res < 1e-12);
        let u_star = true_optimizer_quadratic(&m1(1.0), &v1(1.0), &m1(1.2), &m1(0.0), &v1(0.0)).unwrap();
        assert_relative_eq!(u_star[0], 1.2 / 2.44, epsilon = 1e-12);
        assert_relative_eq!((u_star[0] - u_so[0]).abs(), 0.037258, epsilon = 1e-6);
        // |u| <= 1 gives y in [-1.2, 1.2], so ℓ = 2.2
        let bound = optimizer_gap_bound(2.2, 1.0, &m1(1.2), &m1(1.0)).unwrap();
        assert!((u_star[0] - u_so[0]).abs() <= bound);
    }

    #[test]
    fn origin_is_stationary_without_reference() {
        let (u, _) = stable_input_quadratic(&m1(1.0), &v1(0.0), &m1(1.0), &m1(1.2), &m1(3.0), &v1(0.0)).unwrap();
        assert_eq!(u[0], 0.0);
        let u_star = true_optimizer_quadratic(&m1(1.0), &v1(4.0), &m1(0.0), &m1(0.0), &v1(0.0)).unwrap();
        assert_eq!(u_star[0], 0.0);
    }

    #[test]
    fn gap_bound_properties() {
        let g = m1(1.2);
        assert_eq!(optimizer_gap_bound(2.0, 1.0, &g, &g).unwrap(), 0.0);
        let b1 = optimizer_gap_bound(2.0, 1.0, &m1(1.2), &m1(1.0)).unwrap();
        let b2 = optimizer_gap_bound(2.0, 1.0, &m1(1.4), &m1(1.0)).unwrap();
        assert_relative_eq!(b2, 2.0 * b1, epsilon = 1e-12);
        assert!(optimizer_gap_bound(2.0, 1.0, &m1(1.0), &m1(0.0)).is_err());
    }

    #[test]
    fn wasserstein_bound_cases() {
        let g = DMatrix::from_row_slice(2, 1, &[1.0, 2.0]);
        let gh = DMatrix::from_row_slice(2, 1, &[0.5, 2.5]);
        let (u, u2) = (v1(1.0), v1(-0.5));
        assert_eq!(wasserstein_shift_bound(&g, &gh, &u, &u), 0.0);
        assert_eq!(wasserstein_shift_bound(&g, &g, &u, &u2), 0.0);
        // point-mass laws: exact W1 is the distance between the two outputs
        let exact = ((&g - &gh) * (&u - &u2)).norm();
        assert!(exact <= wasserstein_shift_bound(&g, &gh, &u, &u2) + 1e-15);
    }

    #[test]
    fn retraining_agrees_with_closed_form() {
        let mut rng = seeded_rng(4);
        let q = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let g = DMatrix::from_fn(3, 2, |_, _| rng.random_range(-1.0..1.0));
        let g_hat = &g + DMatrix::from_fn(3, 2, |_, _| 0.05 * rng.random_range(-1.0..1.0));
        let h = DMatrix::from_fn(3, 1, |_, _| rng.random_range(-1.0..1.0));
        let y_ref = DVector::from_column_slice(&[1.0, -0.5, 0.2]);
        let w_bar = v1(0.3);
        let cost = QuadraticCost::new(q.clone(), y_ref.clone(), OutputBox::symmetric(3, 5.0)).unwrap();
        let (direct, _) = stable_input_quadratic(&q, &y_ref, &g_hat, &g, &h, &w_bar).unwrap();
        let (iter, _) = stable_optimizer_retraining(
            &cost,
            0,
            &g_hat,
            &g,
            &h,
            &w_bar,
            &ConvexSet::WholeSpace,
            &DVector::zeros(2),
        )
        .unwrap();
        assert!((direct - iter).norm() < 1e-8);
    }

    fn scalar_constants(eta: f64, g_hat: f64) -> TrackingConstants {
        let sys = LtiSystem::scalar(0.5, 1.0, 1.0, 0.0, 0.0).unwrap();
        let cert = sys.solve_discrete_lyapunov(&m1(1.0)).unwrap();
        let cost = QuadraticCost::new(m1(1.0), v1(1.0), OutputBox::symmetric(1, 3.0)).unwrap();
        let cfg = ControllerConfig::new(eta, m1(g_hat), ConvexSet::WholeSpace, 10).unwrap();
        compute_tracking_constants(&cfg, &cost.constants(), &sys, &cert, 0.5).unwrap()
    }

    #[test]
    fn constants_by_independent_substitution() {
        let c = scalar_constants(0.1, 1.8);
        // P = 4/3, Q = 1, κ = 1/2, A = 1/2, C = 1, G = 2, ℓ̂ = 1 + 1.8
        let p = 4.0 / 3.0;
        let rho = (1.0f64 * (1.0 - 0.5 / p)).sqrt();
        assert_relative_eq!(c.rho_x, rho, epsilon = 1e-12);
        assert_relative_eq!(c.beta2, rho + 0.1 * 2.8, epsilon = 1e-12);
        assert_relative_eq!(c.beta1, 0.9f64.sqrt() + 0.1 * 2.8 * 0.2, epsilon = 1e-12);
        let g3 = (2.0 * p / 0.5f64).sqrt().max(4.0 * 0.5 * p / 0.5);
        assert_relative_eq!(c.gamma3, g3, epsilon = 1e-12);
        assert_eq!((c.gamma1, c.gamma2), (0.1, 1.0));
    }

    #[test]
    fn constant_edge_cases() {
        let c = scalar_constants(1.0, 2.0);
        assert_eq!(c.beta1, 0.0);
        let c0 = scalar_constants(0.0, 1.0);
        assert_eq!(c0.beta1, 1.0);
        assert_eq!(c0.beta2, c0.rho_x);
        let sys = LtiSystem::scalar(0.5, 1.0, 1.0, 0.0, 0.0).unwrap();
        let cert = sys.solve_discrete_lyapunov(&m1(1.0)).unwrap();
        let cost = QuadraticCost::new(m1(1.0), v1(1.0), OutputBox::symmetric(1, 3.0)).unwrap();
        let cfg = ControllerConfig::new(1.5, m1(2.0), ConvexSet::WholeSpace, 10).unwrap();
        assert!(matches!(
            compute_tracking_constants(&cfg, &cost.constants(), &sys, &cert, 0.5),
            Err(Error::InfeasibleGain(_))
        ));
    }

    #[test]
    fn homogeneous_recursion_decays_at_rate() {
        let c = scalar_constants(0.3, 2.0);
        let seq = tracking_bound_sequence(&c, 1.0, 1.0, &[], &[], 0.0, 50);
        for w in seq.windows(2) {
            assert!(w[1].total() <= c.rate() * w[0].total() + 1e-15);
        }
    }

    #[test]
    fn constant_drift_plateau() {
        let c = scalar_constants(0.3, 2.0);
        let delta = 0.01;
        let seq = tracking_bound_sequence(&c, 0.0, 0.0, &[], &vec![delta; 2000], delta, 2000);
        let limit = seq.last().unwrap().total();
        // fixed point of the split recursion
        let ex = c.gamma3 * delta / (1.0 - c.rho_x);
        let eu = (c.gamma2 * delta + c.coupling * ex) / (1.0 - c.beta1);
        assert_relative_eq!(limit, eu + ex, max_relative = 1e-9);
        // no faster than the single-rate approximation with the coupling folded in
        let rough = delta * (c.gamma2 + c.gamma3) / (1.0 - c.rate());
        assert!(limit >= 0.5 * rough);
    }

    #[test]
    fn gradient_error_oracles() {
        let cost = QuadraticCost::new(m1(1.0), v1(1.0), OutputBox::symmetric(1, 3.0)).unwrap();
        let g_hat = m1(2.0);
        let u = v1(0.3);
        let y = v1(0.7);
        let e = gradient_error_sample(0, &u, &y, &g_hat, &cost, &ExpectationOracle::PointMass(y.clone())).unwrap();
        assert_eq!(e[0], 0.0);
        let two = ExpectationOracle::FiniteSupport(vec![(0.5, v1(0.5)), (0.5, v1(0.9))]);
        let e1 = gradient_error_sample(0, &u, &v1(0.5), &g_hat, &cost, &two).unwrap();
        let e2 = gradient_error_sample(0, &u, &v1(0.9), &g_hat, &cost, &two).unwrap();
        assert_relative_eq!(e1[0] + e2[0], 0.0, epsilon = 1e-15);
        // Lipschitz propagation: |e| <= ‖Ĝ‖ ℓ_y∇ |y - E y|
        assert!(e1[0].abs() <= 2.0 * 0.2 + 1e-15);
    }

    #[test]
    fn empirical_error_of_duplicates_is_single_run_error() {
        let mut rng = seeded_rng(8);
        let sys = LtiSystem::random(SystemDims { n: 2, m: 1, p: 1, r: 1 }, (0.3, 0.9), &mut rng).unwrap();
        let cost = QuadraticCost::new(m1(1.0), v1(1.0), OutputBox::symmetric(1, 10.0)).unwrap();
        let g = sys.transfer_closed_form().unwrap().g;
        let cfg = ControllerConfig::new(0.05, g.clone(), ConvexSet::WholeSpace, 30).unwrap();
        let rec = stable_optimizer_quadratic(&cost, 0, &g, &sys, &v1(0.0)).unwrap();
        let oracle = vec![rec.clone(); 30];
        let run = crate::feedback::closed_loop_run(
            &sys,
            &crate::lti::DisturbanceProcess::zero(1),
            &cfg,
            &cost,
            &rec.x_so,
            &rec.u_so,
        )
        .unwrap();
        let single = empirical_tracking_error(&[(&run, &oracle)]).unwrap();
        let double = empirical_tracking_error(&[(&run, &oracle), (&run, &oracle)]).unwrap();
        assert_eq!(single.mean, double.mean);
        assert!(single.mean.iter().all(|e| *e < 1e-10));
        assert!(empirical_tracking_error(&[]).is_err());
    }

    proptest! {
        #[test]
        fn beta1_is_monotone_in_mismatch(
            eta in 0.0f64..1.0,
            ell in 0.0f64..5.0,
            d1 in 0.0f64..2.0,
            d2 in 0.0f64..2.0,
        ) {
            let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
            prop_assert!(beta1(eta, 1.0, ell, lo) <= beta1(eta, 1.0, ell, hi));
            // the mismatch term ηℓ̂d grows with η
            let eta2 = (eta + 0.1).min(1.0);
            prop_assert!(eta * ell * lo <= eta2 * ell * lo);
        }

        #[test]
        fn stable_equals_true_when_gain_is_exact(g in -3.0f64..3.0, r in -2.0f64..2.0, q in 0.1f64..3.0) {
            let (u_so, _) = stable_input_quadratic(&m1(q), &v1(r), &m1(g), &m1(g), &m1(0.5), &v1(0.2)).unwrap();
            let u_star = true_optimizer_quadratic(&m1(q), &v1(r), &m1(g), &m1(0.5), &v1(0.2)).unwrap();
            prop_assert!((u_so - u_star).norm() < 1e-12);
        }
    }
}
