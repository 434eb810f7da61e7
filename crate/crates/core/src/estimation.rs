//! Recovering the steady-state gain `G = C(I-A)^{-1}B` from one finite
//! input/output experiment.
//!
//! All three estimators solve a linear system `S M = R` whose rows are block
//! rows of Hankel matrices built from the data (see [`RegressorSystem`]) and
//! then read off `Ĝ = [Y]_i M`. The minimum-Frobenius-norm solution is
//! returned so results are deterministic.
//!
//! | method | constraints |
//! |---|---|
//! | [`EstimationMethod::ExactKnownNoise`] | `Yd M = 0`, `Wd M = 0`, `U M = 1⊗I`, `W M = 0` |
//! | [`EstimationMethod::ConstantNoise`] | same on `(Δu, Δy)` with no noise blocks |
//! | [`EstimationMethod::MinNormUnknownNoise`] | `Yd M = 0`, `U M = 1⊗I` |
//!
//! Audit helpers ([`error_decomposition`], [`error_bound_full_rank_c`]) take
//! the true plant and are kept separate from the estimators.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::hankel::{self, build_hankel, difference_signal, HankelMatrix};
use crate::linalg;
use crate::lti::{matrix_to_rows, LtiSystem};
use crate::signal::Signal;

/// Relative residual above which a constraint block is declared inconsistent.
pub const SOLVE_TOLERANCE: f64 = 1e-8;

/// Relative singular-value cutoff of the minimum-norm solve.
pub const RANK_CUTOFF: f64 = 1e-10;

/// Default training horizon `T = (m + r + 1)(n + ν) + 4`.
pub fn default_horizon(n: usize, m: usize, r: usize, nu: usize) -> usize {
    (m + r + 1) * (n + nu) + 4
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimationMethod {
    #[serde(alias = "exact")]
    ExactKnownNoise,
    ConstantNoise,
    #[serde(alias = "min-norm")]
    MinNormUnknownNoise,
}

impl EstimationMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            EstimationMethod::ExactKnownNoise => "exact-known-noise",
            EstimationMethod::ConstantNoise => "constant-noise",
            EstimationMethod::MinNormUnknownNoise => "min-norm-unknown-noise",
        }
    }
}

impl fmt::Display for EstimationMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimationMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" | "exact-known-noise" => Ok(Self::ExactKnownNoise),
            "constant-noise" => Ok(Self::ConstantNoise),
            "min-norm" | "min-norm-unknown-noise" => Ok(Self::MinNormUnknownNoise),
            other => Err(Error::InvalidArgument(format!(
                "unknown estimation method `{other}` (expected exact, constant-noise or min-norm)"
            ))),
        }
    }
}

/// One labelled row block of `S M = R`.
#[derive(Debug, Clone)]
pub struct RegressorBlock {
    pub label: &'static str,
    pub coefficients: DMatrix<f64>,
    pub rhs: DMatrix<f64>,
}

/// Stacked constraints in the fixed order `Yd, (Wd), U, (W)`.
#[derive(Debug, Clone)]
pub struct RegressorSystem {
    blocks: Vec<RegressorBlock>,
    width: usize,
    m: usize,
}

impl RegressorSystem {
    fn new(width: usize, m: usize) -> Self {
        Self {
            blocks: Vec::new(),
            width,
            m,
        }
    }

    fn push_zero(&mut self, label: &'static str, h: &HankelMatrix) {
        self.blocks.push(RegressorBlock {
            label,
            coefficients: h.matrix().clone(),
            rhs: DMatrix::zeros(h.matrix().nrows(), self.m),
        });
    }

    fn push_identity(&mut self, label: &'static str, h: &HankelMatrix) {
        self.blocks.push(RegressorBlock {
            label,
            coefficients: h.matrix().clone(),
            rhs: linalg::stacked_identity(h.depth(), self.m),
        });
    }

    pub fn blocks(&self) -> &[RegressorBlock] {
        &self.blocks
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn labels(&self) -> Vec<&'static str> {
        self.blocks.iter().map(|b| b.label).collect()
    }

    pub fn coefficients(&self) -> DMatrix<f64> {
        let refs: Vec<&DMatrix<f64>> = self.blocks.iter().map(|b| &b.coefficients).collect();
        linalg::vstack(&refs).expect("blocks share the Hankel width")
    }

    pub fn rhs(&self) -> DMatrix<f64> {
        let refs: Vec<&DMatrix<f64>> = self.blocks.iter().map(|b| &b.rhs).collect();
        linalg::vstack(&refs).expect("blocks share the input dimension")
    }

    /// Row offset of block `label` within the stacked system.
    fn row_range(&self, label: &str) -> Option<std::ops::Range<usize>> {
        let mut start = 0;
        for b in &self.blocks {
            let end = start + b.coefficients.nrows();
            if b.label == label {
                return Some(start..end);
            }
            start = end;
        }
        None
    }

    /// Relative residual `‖S_b M - R_b‖ / (‖S_b‖‖M‖ + ‖R_b‖)` per block.
    pub fn block_residuals(&self, m: &DMatrix<f64>) -> Vec<(&'static str, f64)> {
        self.blocks
            .iter()
            .map(|b| {
                let abs = (&b.coefficients * m - &b.rhs).norm();
                let scale = b.coefficients.norm() * m.norm() + b.rhs.norm();
                (b.label, if scale > 0.0 { abs / scale } else { abs })
            })
            .collect()
    }

    /// Minimum-norm solution; fails naming the worst block if inconsistent.
    pub fn solve(self) -> Result<RegressorSolution> {
        let s = self.coefficients();
        let r = self.rhs();
        let (m, rank) = linalg::min_norm_solve(&s, &r, RANK_CUTOFF)?;
        let residuals = self.block_residuals(&m);
        if let Some(&(block, residual)) = residuals
            .iter()
            .filter(|(_, res)| !(*res <= SOLVE_TOLERANCE))
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal))
        {
            return Err(Error::InfeasibleConstraints {
                block: block.to_string(),
                residual,
            });
        }
        Ok(RegressorSolution {
            system: self,
            m,
            rank,
            residuals,
        })
    }
}

#[derive(Debug, Clone)]
pub struct RegressorSolution {
    pub system: RegressorSystem,
    pub m: DMatrix<f64>,
    pub rank: usize,
    pub residuals: Vec<(&'static str, f64)>,
}

/// Audit and solver diagnostics attached to an estimate.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Residuals {
    /// Largest relative constraint residual of the solve.
    pub constraint: f64,
    /// `max_i ‖[Y]_i M - [Y]_1 M‖`; zero in theory for the exact methods.
    pub cross_block: f64,
    /// `‖[W]_i M‖` when the noise sequence is available.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_block: Option<f64>,
    /// `‖[Wd]_i M‖` when the noise sequence is available.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_diff_block: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TransferEstimate {
    pub g_hat: DMatrix<f64>,
    pub method: EstimationMethod,
    pub residuals: Residuals,
    /// 1-indexed block row used to read off `Ĝ`.
    pub block: usize,
    pub nu: usize,
    /// Solution of the regressor system.
    pub m_hat: DMatrix<f64>,
}

impl Serialize for TransferEstimate {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = serializer.serialize_struct("TransferEstimate", 5)?;
        st.serialize_field("G_hat", &matrix_to_rows(&self.g_hat))?;
        st.serialize_field("method", &self.method)?;
        st.serialize_field("residuals", &self.residuals)?;
        st.serialize_field("block", &self.block)?;
        st.serialize_field("nu", &self.nu)?;
        st.end()
    }
}

/// Knobs shared by the estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EstimationOptions {
    /// Hankel depth ν (an upper bound on the observability index works).
    pub nu: usize,
    /// Block row `i ∈ 1..=ν` used for `Ĝ = [Y]_i M`.
    pub block: usize,
    /// Order for the excitation check of the input; defaults to ν.
    /// Pass `n + ν` when the state dimension is known.
    pub excitation_order: Option<usize>,
}

impl EstimationOptions {
    pub fn new(nu: usize) -> Self {
        Self {
            nu,
            block: 1,
            excitation_order: None,
        }
    }

    pub fn with_block(mut self, block: usize) -> Self {
        self.block = block;
        self
    }

    pub fn with_excitation_order(mut self, order: usize) -> Self {
        self.excitation_order = Some(order);
        self
    }

    fn validate(&self) -> Result<()> {
        if self.nu == 0 {
            return Err(Error::InvalidArgument("ν must be at least 1".into()));
        }
        if self.block == 0 || self.block > self.nu {
            return Err(Error::IndexOutOfRange(format!(
                "block index {} outside 1..={}",
                self.block, self.nu
            )));
        }
        Ok(())
    }
}

fn check_lengths(pairs: &[(&str, &Signal)]) -> Result<usize> {
    let len = pairs[0].1.len();
    for (name, s) in pairs {
        if s.len() != len {
            return Err(Error::dimension(format!("{name} length"), len, s.len()));
        }
    }
    Ok(len)
}

fn width_for(len: usize, nu: usize) -> Result<usize> {
    // Differences consume one sample, so the widest usable q is len - ν.
    if len < nu + 2 {
        return Err(Error::InsufficientData(format!(
            "need at least {} samples for depth {nu}, got {len}",
            nu + 2
        )));
    }
    Ok(len - nu)
}

fn cross_block_spread(y: &HankelMatrix, m: &DMatrix<f64>) -> Result<f64> {
    let first = y.block_row(1)? * m;
    let mut spread: f64 = 0.0;
    for i in 2..=y.depth() {
        spread = spread.max((y.block_row(i)? * m - &first).norm());
    }
    Ok(spread)
}

fn is_zero(s: &Signal) -> bool {
    s.as_matrix().iter().all(|v| *v == 0.0)
}

/// Hankel blocks of a signal and of its differences at a common width.
fn hankel_pair(z: &Signal, nu: usize, q: usize) -> Result<(HankelMatrix, HankelMatrix)> {
    let plain = build_hankel(z, nu, q)?;
    let diff = build_hankel(&difference_signal(z)?, nu, q)?;
    Ok((plain, diff))
}

/// Solve the known-noise regressor system for `M`.
///
/// `u`, `w` and `y` are sampled at the same `L = T + 1` instants.
pub fn solve_m_exact(u: &Signal, w: &Signal, y: &Signal, opts: &EstimationOptions) -> Result<RegressorSolution> {
    opts.validate()?;
    let len = check_lengths(&[("u", u), ("w", w), ("y", y)])?;
    let q = width_for(len, opts.nu)?;
    let order = opts.excitation_order.unwrap_or(opts.nu);
    let train = len - 1;
    hankel::require_persistently_exciting("u", &u.slice(0..train)?, order)?;
    if !is_zero(w) {
        let stacked = u.stack(w)?.slice(0..train)?;
        let report = hankel::is_persistently_exciting(&stacked, order);
        if !report.exciting {
            log::warn!(
                "stacked (u, w) is not persistently exciting of order {order} (rank {} < {}); relying on the feasibility check",
                report.rank,
                report.required
            );
        }
    }

    let (_, yd) = hankel_pair(y, opts.nu, q)?;
    let (wh, wd) = hankel_pair(w, opts.nu, q)?;
    let uh = build_hankel(u, opts.nu, q)?;
    let mut sys = RegressorSystem::new(q, u.dim());
    sys.push_zero("Y_diff", &yd);
    sys.push_zero("W_diff", &wd);
    sys.push_identity("U", &uh);
    sys.push_zero("W", &wh);
    sys.solve()
}

fn finish(
    method: EstimationMethod,
    y: &Signal,
    solution: RegressorSolution,
    opts: &EstimationOptions,
    audit_w: Option<&Signal>,
) -> Result<TransferEstimate> {
    let q = solution.system.width();
    let yh = build_hankel(y, opts.nu, q)?;
    let g_hat = yh.block_row(opts.block)? * &solution.m;
    let mut residuals = Residuals {
        constraint: solution.residuals.iter().map(|r| r.1).fold(0.0, f64::max),
        cross_block: cross_block_spread(&yh, &solution.m)?,
        ..Default::default()
    };
    if let Some(w) = audit_w {
        let (wh, wd) = hankel_pair(w, opts.nu, q)?;
        residuals.noise_block = Some((wh.block_row(opts.block)? * &solution.m).norm());
        residuals.noise_diff_block = Some((wd.block_row(opts.block)? * &solution.m).norm());
    }
    Ok(TransferEstimate {
        g_hat,
        method,
        residuals,
        block: opts.block,
        nu: opts.nu,
        m_hat: solution.m,
    })
}

/// Exact estimate with the noise sequence known.
pub fn estimate_g_exact(u: &Signal, w: &Signal, y: &Signal, opts: &EstimationOptions) -> Result<TransferEstimate> {
    let solution = solve_m_exact(u, w, y, opts)?;
    finish(EstimationMethod::ExactKnownNoise, y, solution, opts, Some(w))
}

/// Exact estimate under an unknown but constant disturbance, using the
/// differenced data `(Δu, Δy)`. Needs one more sample than the known-noise
/// method for the same width.
pub fn estimate_g_constant_noise(u: &Signal, y: &Signal, opts: &EstimationOptions) -> Result<TransferEstimate> {
    opts.validate()?;
    check_lengths(&[("u", u), ("y", y)])?;
    let v = difference_signal(u)?;
    let r = difference_signal(y)?;
    let len = v.len();
    let q = width_for(len, opts.nu)?;
    hankel::require_persistently_exciting("Δu", &v.slice(0..len - 1)?, opts.excitation_order.unwrap_or(opts.nu))?;

    let (_, rd) = hankel_pair(&r, opts.nu, q)?;
    let vh = build_hankel(&v, opts.nu, q)?;
    let mut sys = RegressorSystem::new(q, u.dim());
    sys.push_zero("R_diff", &rd);
    sys.push_identity("V", &vh);
    let solution = sys.solve()?;
    finish(EstimationMethod::ConstantNoise, &r, solution, opts, None)
}

/// Minimum-norm estimate ignoring the (unknown) noise. When `audit_w` is
/// given the noise residual fields are filled in.
pub fn estimate_g_minnorm(
    u: &Signal,
    y: &Signal,
    opts: &EstimationOptions,
    audit_w: Option<&Signal>,
) -> Result<TransferEstimate> {
    opts.validate()?;
    let len = check_lengths(&[("u", u), ("y", y)])?;
    if let Some(w) = audit_w {
        check_lengths(&[("u", u), ("w", w)])?;
    }
    let q = width_for(len, opts.nu)?;
    hankel::require_persistently_exciting("u", &u.slice(0..len - 1)?, opts.excitation_order.unwrap_or(opts.nu))?;

    let (_, yd) = hankel_pair(y, opts.nu, q)?;
    let uh = build_hankel(u, opts.nu, q)?;
    let mut sys = RegressorSystem::new(q, u.dim());
    sys.push_zero("Y_diff", &yd);
    sys.push_identity("U", &uh);
    let solution = sys.solve()?;
    finish(EstimationMethod::MinNormUnknownNoise, y, solution, opts, audit_w)
}

/// Dispatch on `method`. `w` is required for the known-noise method and
/// used for audit residuals by the min-norm method.
pub fn estimate(
    method: EstimationMethod,
    u: &Signal,
    y: &Signal,
    w: Option<&Signal>,
    opts: &EstimationOptions,
) -> Result<TransferEstimate> {
    match method {
        EstimationMethod::ExactKnownNoise => {
            let w = w.ok_or_else(|| Error::InvalidArgument("the exact method needs the noise sequence".into()))?;
            estimate_g_exact(u, w, y, opts)
        }
        EstimationMethod::ConstantNoise => estimate_g_constant_noise(u, y, opts),
        EstimationMethod::MinNormUnknownNoise => estimate_g_minnorm(u, y, opts, w),
    }
}

/// Norm of `[W]_i U⁺`, where `U⁺` are the columns of the pseudo-inverse of
/// the min-norm constraint matrix that multiply the `U` rows. Small values
/// mean the noise barely leaks into `Ĝ`.
pub fn noise_input_alignment(u: &Signal, y: &Signal, w: &Signal, opts: &EstimationOptions) -> Result<f64> {
    opts.validate()?;
    let len = check_lengths(&[("u", u), ("y", y), ("w", w)])?;
    let q = width_for(len, opts.nu)?;
    let (_, yd) = hankel_pair(y, opts.nu, q)?;
    let uh = build_hankel(u, opts.nu, q)?;
    let mut sys = RegressorSystem::new(q, u.dim());
    sys.push_zero("Y_diff", &yd);
    sys.push_identity("U", &uh);
    let pinv = linalg::pseudo_inverse(&sys.coefficients())?;
    let range = sys.row_range("U").expect("U block present");
    let u_plus = pinv.columns(range.start, range.len()).into_owned();
    let wh = build_hankel(w, opts.nu, q)?;
    Ok(linalg::spectral_norm(&(wh.block_row(opts.block)? * u_plus)))
}

/// The three addends of `Ĝ - G` for a solution of `Yd M = 0`, `U M = 1⊗I`.
#[derive(Debug, Clone)]
pub struct ErrorDecomposition {
    /// `CA([X]_i M - (I-A)^{-1}B)`
    pub state_term: DMatrix<f64>,
    /// `(CE + D)[W]_i M`
    pub noise_term: DMatrix<f64>,
    /// `D[Wd]_i M`
    pub noise_diff_term: DMatrix<f64>,
    /// `Ĝ - G`
    pub error: DMatrix<f64>,
    /// `‖sum of terms - (Ĝ - G)‖_F`
    pub discrepancy: f64,
}

impl ErrorDecomposition {
    pub fn sum(&self) -> DMatrix<f64> {
        &self.state_term + &self.noise_term + &self.noise_diff_term
    }
}

/// Audit: split `Ĝ - G` using the true plant and the recorded state and
/// noise of the training run. `x`, `w` must cover the same instants as the
/// data the estimate was computed from.
pub fn error_decomposition(
    sys: &LtiSystem,
    estimate: &TransferEstimate,
    x: &Signal,
    w: &Signal,
) -> Result<ErrorDecomposition> {
    if estimate.method == EstimationMethod::ConstantNoise {
        return Err(Error::InvalidArgument(
            "the decomposition applies to estimates computed from undifferenced data".into(),
        ));
    }
    let q = estimate.m_hat.nrows();
    let nu = estimate.nu;
    let i = estimate.block;
    let m = &estimate.m_hat;
    let tf = sys.transfer_closed_form()?;
    let xi = build_hankel(x, nu, q)?.block_row(i)? * m;
    let (wh, wd) = hankel_pair(w, nu, q)?;
    let wi = wh.block_row(i)? * m;
    let wdi = wd.block_row(i)? * m;

    let ss = sys.resolvent_at_one(sys.b())?;
    let state_term = sys.c() * sys.a() * (xi - ss);
    let noise_term = (sys.c() * sys.e() + sys.d()) * wi;
    let noise_diff_term = sys.d() * wdi;
    let error = &estimate.g_hat - &tf.g;
    let discrepancy = (&state_term + &noise_term + &noise_diff_term - &error).norm();
    Ok(ErrorDecomposition {
        state_term,
        noise_term,
        noise_diff_term,
        error,
        discrepancy,
    })
}

/// Closed-form error and its norm bound when `C` has full column rank and ν = 1.
#[derive(Debug, Clone)]
pub struct FullRankCBound {
    /// `(C(I-A)^{-1}E + D)[W]M + C(I-A)^{-1}C⁺D[Wd]M`
    pub predicted_error: DMatrix<f64>,
    /// `‖C(I-A)^{-1}E + D‖‖[W]M‖ + ‖C(I-A)^{-1}C⁺D‖‖[Wd]M‖` (spectral norms)
    pub bound: f64,
    /// `‖Ĝ - G‖` (spectral)
    pub actual: f64,
    /// `‖predicted_error - (Ĝ - G)‖_F`
    pub discrepancy: f64,
}

pub fn error_bound_full_rank_c(sys: &LtiSystem, estimate: &TransferEstimate, w: &Signal) -> Result<FullRankCBound> {
    if estimate.nu != 1 {
        return Err(Error::InvalidArgument(format!(
            "the full-rank-C bound needs ν = 1, estimate used ν = {}",
            estimate.nu
        )));
    }
    if linalg::numerical_rank(sys.c(), 1e-12) != sys.n() {
        return Err(Error::Structural("C does not have full column rank".into()));
    }
    let q = estimate.m_hat.nrows();
    let m = &estimate.m_hat;
    let (wh, wd) = hankel_pair(w, 1, q)?;
    let wm = wh.matrix() * m;
    let wdm = wd.matrix() * m;

    let c_pinv = linalg::pseudo_inverse(sys.c())?;
    let noise_gain = sys.c() * sys.resolvent_at_one(sys.e())? + sys.d();
    let diff_gain = sys.c() * sys.resolvent_at_one(&(c_pinv * sys.d()))?;
    let predicted_error = &noise_gain * &wm + &diff_gain * &wdm;
    let bound = linalg::spectral_norm(&noise_gain) * linalg::spectral_norm(&wm)
        + linalg::spectral_norm(&diff_gain) * linalg::spectral_norm(&wdm);

    let error = &estimate.g_hat - sys.transfer_closed_form()?.g;
    Ok(FullRankCBound {
        discrepancy: (&predicted_error - &error).norm(),
        actual: linalg::spectral_norm(&error),
        predicted_error,
        bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::{seeded_rng, SystemDims, Trajectory};
    use approx::assert_relative_eq;
    use nalgebra::DVector;
    use rand::Rng;

    fn uniform(dim: usize, len: usize, scale: f64, rng: &mut impl Rng) -> Signal {
        Signal::from_matrix(DMatrix::from_fn(dim, len, |_, _| scale * rng.random_range(-1.0..1.0)))
    }

    fn run(sys: &LtiSystem, w: &Signal, len: usize, seed: u64) -> Trajectory {
        let mut rng = seeded_rng(seed);
        let u = uniform(sys.m(), len, 1.0, &mut rng);
        sys.simulate_signals(&DVector::zeros(sys.n()), &u, w, len).unwrap()
    }

    fn scalar() -> LtiSystem {
        LtiSystem::scalar(0.5, 1.0, 1.0, 0.0, 1.0).unwrap()
    }

    #[test]
    fn scalar_exact_recovers_two() {
        let sys = scalar();
        let mut rng = seeded_rng(11);
        let w = uniform(1, 31, 1.0, &mut rng);
        let tr = run(&sys, &w, 31, 3);
        let est = estimate_g_exact(&tr.u, &tr.w, &tr.y, &EstimationOptions::new(1)).unwrap();
        assert_relative_eq!(est.g_hat[(0, 0)], 2.0, epsilon = 1e-8);
        assert!(est.residuals.noise_block.unwrap() < 1e-8);
    }

    #[test]
    fn constant_noise_cancels() {
        let sys = scalar();
        let w = Signal::scalar(&[0.7; 40]);
        let tr = run(&sys, &w, 40, 5);
        let est = estimate_g_constant_noise(&tr.u, &tr.y, &EstimationOptions::new(1)).unwrap();
        assert_relative_eq!(est.g_hat[(0, 0)], 2.0, epsilon = 1e-7);
    }

    #[test]
    fn noiseless_minnorm_is_exact_and_cross_block_consistent() {
        let mut rng = seeded_rng(7);
        let base = LtiSystem::random(SystemDims { n: 3, m: 2, p: 2, r: 1 }, (0.3, 0.9), &mut rng).unwrap();
        let sys = base
            .with_disturbance_channels(DMatrix::zeros(2, 1), DMatrix::zeros(3, 1))
            .unwrap();
        let nu = sys.structural_indices().unwrap().observability;
        assert_eq!(nu, 2);
        let len = default_horizon(3, 2, 1, nu) + 1;
        let tr = run(&sys, &Signal::zeros(1, len), len, 9);
        let g = sys.transfer_closed_form().unwrap().g;
        let e1 = estimate_g_minnorm(&tr.u, &tr.y, &EstimationOptions::new(nu), Some(&tr.w)).unwrap();
        let e2 = estimate_g_minnorm(&tr.u, &tr.y, &EstimationOptions::new(nu).with_block(2), None).unwrap();
        assert!((&e1.g_hat - &g).norm() < 1e-8);
        assert!((&e1.g_hat - &e2.g_hat).norm() < 1e-8);
        assert_eq!(e1.residuals.noise_block, Some(0.0));
        let exact = estimate_g_exact(&tr.u, &tr.w, &tr.y, &EstimationOptions::new(nu)).unwrap();
        assert!((&exact.g_hat - &g).norm() < 1e-8);
    }

    #[test]
    fn constant_input_is_not_exciting() {
        let sys = scalar();
        let u = Signal::scalar(&[1.0; 20]);
        let tr = sys
            .simulate_signals(&DVector::zeros(1), &u, &Signal::scalar(&[0.0; 20]), 20)
            .unwrap();
        let err =
            estimate_g_minnorm(&tr.u, &tr.y, &EstimationOptions::new(1).with_excitation_order(2), None).unwrap_err();
        assert!(matches!(err, Error::NotPersistentlyExciting { rank: 1, .. }));
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn block_index_is_validated() {
        let sys = scalar();
        let tr = run(&sys, &Signal::zeros(1, 20), 20, 1);
        let err = estimate_g_minnorm(&tr.u, &tr.y, &EstimationOptions::new(1).with_block(2), None).unwrap_err();
        assert!(matches!(err, Error::IndexOutOfRange(_)));
    }

    #[test]
    fn method_names_round_trip() {
        for m in [
            EstimationMethod::ExactKnownNoise,
            EstimationMethod::ConstantNoise,
            EstimationMethod::MinNormUnknownNoise,
        ] {
            assert_eq!(m.as_str().parse::<EstimationMethod>().unwrap(), m);
        }
        assert!("fancy".parse::<EstimationMethod>().is_err());
    }

    #[test]
    fn decomposition_sums_to_error_on_noisy_data() {
        let mut rng = seeded_rng(21);
        let sys = LtiSystem::random(SystemDims { n: 2, m: 1, p: 1, r: 1 }, (0.3, 0.9), &mut rng).unwrap();
        let nu = sys.structural_indices().unwrap().observability;
        let len = 40;
        let w = uniform(1, len, 0.05, &mut rng);
        let tr = run(&sys, &w, len, 4);
        let est = estimate_g_minnorm(&tr.u, &tr.y, &EstimationOptions::new(nu), Some(&tr.w)).unwrap();
        let dec = error_decomposition(&sys, &est, &tr.x, &tr.w).unwrap();
        assert!(dec.error.norm() > 1e-6);
        assert!(dec.discrepancy < 1e-8, "discrepancy {}", dec.discrepancy);
    }

    #[test]
    fn full_rank_c_bound_dominates() {
        let mut rng = seeded_rng(2);
        let base = LtiSystem::random(SystemDims { n: 2, m: 2, p: 3, r: 2 }, (0.3, 0.9), &mut rng).unwrap();
        let w = uniform(2, 30, 0.01, &mut rng);
        let tr = run(&base, &w, 30, 8);
        let est = estimate_g_minnorm(&tr.u, &tr.y, &EstimationOptions::new(1), Some(&tr.w)).unwrap();
        let b = error_bound_full_rank_c(&base, &est, &tr.w).unwrap();
        assert!(b.discrepancy < 1e-8);
        assert!(b.actual <= b.bound * (1.0 + 1e-12));
        let nu2 = estimate_g_minnorm(&tr.u, &tr.y, &EstimationOptions::new(2), None).unwrap();
        assert!(error_bound_full_rank_c(&base, &nu2, &tr.w).is_err());
    }

    #[test]
    fn estimate_json_layout() {
        let sys = scalar();
        let tr = run(&sys, &Signal::zeros(1, 20), 20, 1);
        let est = estimate_g_minnorm(&tr.u, &tr.y, &EstimationOptions::new(1), None).unwrap();
        let v: serde_json::Value = serde_json::to_value(&est).unwrap();
        assert_eq!(v["method"], "min-norm-unknown-noise");
        assert!((v["G_hat"][0][0].as_f64().unwrap() - 2.0).abs() < 1e-8);
        assert!(v["residuals"].get("noise_block").is_none());
    }
}
