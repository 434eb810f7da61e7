//! Online gradient feedback controller.
//!
//! The controller only sees the measured output `y_k` and an estimate `Ĝ`
//! of the steady-state gain:
//!
//! ```text
//! u_{k+1} = Π_U( u_k - η (∇_u φ(u_k, y_k) + Ĝ^T ∇_y φ(u_k, y_k)) )
//! ```

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg;
use crate::lti::{matrix_from_rows, matrix_to_rows, DisturbanceProcess, LtiSystem, LyapunovCertificate, Trajectory};
use crate::signal::Signal;

/// Constants of a cost `φ(u, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostConstants {
    /// Strong convexity modulus in `u`.
    pub mu: f64,
    /// Lipschitz constant of `y ↦ φ(u, y)` over the declared output box.
    pub ell: f64,
    /// Lipschitz constant of the gradient in `u`.
    pub ell_u_grad: f64,
    /// Lipschitz constant of the gradient in `y`.
    pub ell_y_grad: f64,
}

impl CostConstants {
    /// `ℓ̂ = ℓᵤ∇ + ‖Ĝ‖ ℓ_y∇`.
    pub fn ell_hat(&self, g_hat: &DMatrix<f64>) -> f64 {
        self.ell_u_grad + linalg::spectral_norm(g_hat) * self.ell_y_grad
    }

    fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0) {
            return Err(Error::InvalidArgument(format!("μ must be positive, got {}", self.mu)));
        }
        for (name, v) in [("ℓ", self.ell), ("ℓᵤ∇", self.ell_u_grad), ("ℓ_y∇", self.ell_y_grad)] {
            if !(v >= 0.0) {
                return Err(Error::InvalidArgument(format!("{name} must be nonnegative, got {v}")));
            }
        }
        Ok(())
    }
}

/// A (possibly time-varying) cost `φ_k(u, y)` with gradient oracles.
pub trait CostModel: Send + Sync {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn value(&self, k: usize, u: &DVector<f64>, y: &DVector<f64>) -> f64;
    fn grad_u(&self, k: usize, u: &DVector<f64>, y: &DVector<f64>) -> DVector<f64>;
    fn grad_y(&self, k: usize, u: &DVector<f64>, y: &DVector<f64>) -> DVector<f64>;
    /// Constants valid uniformly over time.
    fn constants(&self) -> CostConstants;
}

/// Axis-aligned box of outputs over which `ℓ` is evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl OutputBox {
    pub fn symmetric(dim: usize, radius: f64) -> Self {
        Self {
            lower: vec![-radius; dim],
            upper: vec![radius; dim],
        }
    }
}

/// `φ_k(u, y) = ½ uᵀ Q_u u + ½ ‖y - y_ref,k‖²`.
///
/// Quadratics are not globally Lipschitz in `y`, so `ℓ` is the largest
/// `‖y - y_ref,k‖` over the operating box and all reference values.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticCost {
    q_u: DMatrix<f64>,
    y_ref: Vec<DVector<f64>>,
    operating_box: OutputBox,
    constants: CostConstants,
}

impl QuadraticCost {
    pub fn new(q_u: DMatrix<f64>, y_ref: DVector<f64>, operating_box: OutputBox) -> Result<Self> {
        Self::time_varying(q_u, vec![y_ref], operating_box)
    }

    /// Reference sequence; steps past the end reuse the last entry.
    pub fn time_varying(q_u: DMatrix<f64>, y_ref: Vec<DVector<f64>>, operating_box: OutputBox) -> Result<Self> {
        if !q_u.is_square() || q_u.nrows() == 0 {
            return Err(Error::dimension(
                "Q_u",
                "non-empty square",
                format!("{}x{}", q_u.nrows(), q_u.ncols()),
            ));
        }
        if linalg::asymmetry(&q_u) > 1e-12 {
            return Err(Error::InvalidArgument("Q_u must be symmetric".into()));
        }
        let p = y_ref
            .first()
            .ok_or_else(|| Error::InvalidArgument("reference sequence is empty".into()))?
            .len();
        for (k, r) in y_ref.iter().enumerate() {
            if r.len() != p {
                return Err(Error::dimension(format!("y_ref[{k}]"), p, r.len()));
            }
        }
        if operating_box.lower.len() != p || operating_box.upper.len() != p {
            return Err(Error::dimension("operating box", p, operating_box.lower.len()));
        }
        if operating_box.lower.iter().zip(&operating_box.upper).any(|(l, u)| l > u) {
            return Err(Error::InvalidArgument("operating box has lower > upper".into()));
        }
        let (mu, ell_u_grad) = linalg::symmetric_eigen_extremes(&q_u);
        let ell = y_ref
            .iter()
            .map(|r| {
                (0..p)
                    .map(|i| {
                        let d = (operating_box.lower[i] - r[i])
                            .abs()
                            .max((operating_box.upper[i] - r[i]).abs());
                        d * d
                    })
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max);
        let constants = CostConstants {
            mu,
            ell,
            ell_u_grad,
            ell_y_grad: 1.0,
        };
        constants.validate()?;
        Ok(Self {
            q_u,
            y_ref,
            operating_box,
            constants,
        })
    }

    pub fn q_u(&self) -> &DMatrix<f64> {
        &self.q_u
    }

    pub fn y_ref(&self, k: usize) -> &DVector<f64> {
        &self.y_ref[k.min(self.y_ref.len() - 1)]
    }

    pub fn operating_box(&self) -> &OutputBox {
        &self.operating_box
    }
}

impl CostModel for QuadraticCost {
    fn input_dim(&self) -> usize {
        self.q_u.nrows()
    }
    fn output_dim(&self) -> usize {
        self.y_ref[0].len()
    }
    fn value(&self, k: usize, u: &DVector<f64>, y: &DVector<f64>) -> f64 {
        0.5 * u.dot(&(&self.q_u * u)) + 0.5 * (y - self.y_ref(k)).norm_squared()
    }
    fn grad_u(&self, _k: usize, u: &DVector<f64>, _y: &DVector<f64>) -> DVector<f64> {
        &self.q_u * u
    }
    fn grad_y(&self, k: usize, _u: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        y - self.y_ref(k)
    }
    fn constants(&self) -> CostConstants {
        self.constants
    }
}

/// Worst relative mismatch between the gradient oracles and central finite
/// differences of the value oracle at `samples` random points in `[-scale, scale]`.
pub fn gradient_check<C: CostModel + ?Sized, R: Rng + ?Sized>(
    cost: &C,
    k: usize,
    samples: usize,
    scale: f64,
    rng: &mut R,
) -> f64 {
    let (m, p) = (cost.input_dim(), cost.output_dim());
    let h = 1e-6 * scale.max(1.0);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let u = DVector::from_fn(m, |_, _| scale * rng.random_range(-1.0..1.0));
        let y = DVector::from_fn(p, |_, _| scale * rng.random_range(-1.0..1.0));
        let gu = cost.grad_u(k, &u, &y);
        let gy = cost.grad_y(k, &u, &y);
        let fd_u = DVector::from_fn(m, |i, _| {
            let mut up = u.clone();
            let mut dn = u.clone();
            up[i] += h;
            dn[i] -= h;
            (cost.value(k, &up, &y) - cost.value(k, &dn, &y)) / (2.0 * h)
        });
        let fd_y = DVector::from_fn(p, |i, _| {
            let mut up = y.clone();
            let mut dn = y.clone();
            up[i] += h;
            dn[i] -= h;
            (cost.value(k, &u, &up) - cost.value(k, &u, &dn)) / (2.0 * h)
        });
        let rel = |a: &DVector<f64>, b: &DVector<f64>| (a - b).norm() / a.norm().max(1.0);
        worst = worst.max(rel(&gu, &fd_u)).max(rel(&gy, &fd_y));
    }
    worst
}

/// Closed convex input constraint set `U`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ConvexSet {
    WholeSpace,
    Box {
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    NonnegativeOrthant,
    /// `{u : a_jᵀ u ≤ b_j for all j}`
    HalfspaceIntersection {
        normals: Vec<Vec<f64>>,
        offsets: Vec<f64>,
    },
}

const DYKSTRA_TOL: f64 = 1e-12;
const DYKSTRA_MAX_ITER: usize = 10_000;

impl ConvexSet {
    pub fn unit_box(dim: usize, lower: f64, upper: f64) -> Self {
        ConvexSet::Box {
            lower: vec![lower; dim],
            upper: vec![upper; dim],
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            ConvexSet::WholeSpace | ConvexSet::NonnegativeOrthant => Ok(()),
            ConvexSet::Box { lower, upper } => {
                if lower.len() != dim || upper.len() != dim {
                    return Err(Error::dimension("box bounds", dim, lower.len().max(upper.len())));
                }
                if lower.iter().zip(upper).any(|(l, u)| !(l <= u)) {
                    return Err(Error::InvalidArgument("box has lower > upper".into()));
                }
                Ok(())
            }
            ConvexSet::HalfspaceIntersection { normals, offsets } => {
                if normals.len() != offsets.len() {
                    return Err(Error::dimension("halfspace offsets", normals.len(), offsets.len()));
                }
                for (j, a) in normals.iter().enumerate() {
                    if a.len() != dim {
                        return Err(Error::dimension(format!("normal {j}"), dim, a.len()));
                    }
                    if a.iter().all(|v| *v == 0.0) {
                        return Err(Error::InvalidArgument(format!("normal {j} is zero")));
                    }
                }
                Ok(())
            }
        }
    }

    pub fn contains(&self, u: &DVector<f64>, tol: f64) -> bool {
        match self {
            ConvexSet::WholeSpace => true,
            ConvexSet::NonnegativeOrthant => u.iter().all(|v| *v >= -tol),
            ConvexSet::Box { lower, upper } => u
                .iter()
                .enumerate()
                .all(|(i, v)| *v >= lower[i] - tol && *v <= upper[i] + tol),
            ConvexSet::HalfspaceIntersection { normals, offsets } => normals
                .iter()
                .zip(offsets)
                .all(|(a, b)| DVector::from_column_slice(a).dot(u) <= b + tol),
        }
    }

    /// Euclidean projection. A single halfspace is projected in closed form;
    /// intersections of several use Dykstra's alternating projections.
    pub fn project(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        self.validate(u.len())?;
        Ok(match self {
            ConvexSet::WholeSpace => u.clone(),
            ConvexSet::NonnegativeOrthant => u.map(|v| v.max(0.0)),
            ConvexSet::Box { lower, upper } => DVector::from_fn(u.len(), |i, _| u[i].clamp(lower[i], upper[i])),
            ConvexSet::HalfspaceIntersection { normals, offsets } => {
                let planes: Vec<(DVector<f64>, f64)> = normals
                    .iter()
                    .zip(offsets)
                    .map(|(a, b)| (DVector::from_column_slice(a), *b))
                    .collect();
                project_halfspaces(&planes, u)?
            }
        })
    }
}

fn project_halfspace(a: &DVector<f64>, b: f64, v: &DVector<f64>) -> DVector<f64> {
    let excess = a.dot(v) - b;
    if excess <= 0.0 {
        v.clone()
    } else {
        v - a * (excess / a.norm_squared())
    }
}

fn project_halfspaces(planes: &[(DVector<f64>, f64)], u: &DVector<f64>) -> Result<DVector<f64>> {
    if planes.len() == 1 {
        return Ok(project_halfspace(&planes[0].0, planes[0].1, u));
    }
    let mut x = u.clone();
    let mut corrections = vec![DVector::zeros(u.len()); planes.len()];
    for _ in 0..DYKSTRA_MAX_ITER {
        let prev = x.clone();
        for (j, (a, b)) in planes.iter().enumerate() {
            let shifted = &x + &corrections[j];
            let next = project_halfspace(a, *b, &shifted);
            corrections[j] = shifted - &next;
            x = next;
        }
        if (&x - &prev).norm() <= DYKSTRA_TOL * (1.0 + x.norm()) {
            let feasible = planes
                .iter()
                .all(|(a, b)| a.dot(&x) - b <= 1e-9 * (1.0 + b.abs()) * a.norm());
            if feasible {
                return Ok(x);
            }
            break;
        }
    }
    Err(Error::Numerical(
        "halfspace projection failed (empty intersection?)".into(),
    ))
}

/// Step size, gain estimate and input constraints of the controller.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerConfig {
    pub eta: f64,
    pub g_hat: DMatrix<f64>,
    pub constraint: ConvexSet,
    pub horizon: usize,
}

impl ControllerConfig {
    pub fn new(eta: f64, g_hat: DMatrix<f64>, constraint: ConvexSet, horizon: usize) -> Result<Self> {
        let cfg = Self {
            eta,
            g_hat,
            constraint,
            horizon,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta >= 0.0) || !self.eta.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "η must be finite and nonnegative, got {}",
                self.eta
            )));
        }
        self.constraint.validate(self.g_hat.ncols())
    }

    fn check_dims(&self, u: &DVector<f64>, y: &DVector<f64>) -> Result<()> {
        if u.len() != self.g_hat.ncols() {
            return Err(Error::dimension("u", self.g_hat.ncols(), u.len()));
        }
        if y.len() != self.g_hat.nrows() {
            return Err(Error::dimension("y", self.g_hat.nrows(), y.len()));
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
#[allow(non_snake_case)]
struct ControllerDocument {
    eta: f64,
    G_hat: Vec<Vec<f64>>,
    #[serde(default = "whole_space")]
    constraint: ConvexSet,
    #[serde(default)]
    horizon: usize,
}

fn whole_space() -> ConvexSet {
    ConvexSet::WholeSpace
}

impl Serialize for ControllerConfig {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        ControllerDocument {
            eta: self.eta,
            G_hat: matrix_to_rows(&self.g_hat),
            constraint: self.constraint.clone(),
            horizon: self.horizon,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ControllerConfig {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let doc = ControllerDocument::deserialize(deserializer)?;
        let g_hat = matrix_from_rows("G_hat", &doc.G_hat).map_err(D::Error::custom)?;
        ControllerConfig::new(doc.eta, g_hat, doc.constraint, doc.horizon).map_err(D::Error::custom)
    }
}

/// Unprojected step `u - η(∇_u φ + Ĝᵀ ∇_y φ)`.
pub fn controller_step<C: CostModel + ?Sized>(
    k: usize,
    u: &DVector<f64>,
    y: &DVector<f64>,
    cfg: &ControllerConfig,
    cost: &C,
) -> Result<DVector<f64>> {
    cfg.check_dims(u, y)?;
    let direction = cost.grad_u(k, u, y) + cfg.g_hat.transpose() * cost.grad_y(k, u, y);
    Ok(u - direction * cfg.eta)
}

/// [`controller_step`] followed by projection onto the constraint set.
pub fn projected_step<C: CostModel + ?Sized>(
    k: usize,
    u: &DVector<f64>,
    y: &DVector<f64>,
    cfg: &ControllerConfig,
    cost: &C,
) -> Result<DVector<f64>> {
    let raw = controller_step(k, u, y, cfg, cost)?;
    cfg.constraint.project(&raw)
}

/// Closed-loop run with the controller in feedback.
#[derive(Debug, Clone)]
pub struct ClosedLoopRun {
    /// `u_0..u_{H-1}`, `w`, `x_0..x_H`, `y_0..y_{H-1}`.
    pub trajectory: Trajectory,
    /// The input computed after the last measurement, `u_H`.
    pub final_input: DVector<f64>,
}

/// Interconnect plant and controller for `cfg.horizon` steps under an explicit
/// disturbance sequence. At each `k`: measure `y_k`, apply `u_k`, then
/// compute `u_{k+1}` from `(u_k, y_k)`.
pub fn closed_loop_run_signals<C: CostModel + ?Sized>(
    sys: &LtiSystem,
    w: &Signal,
    cfg: &ControllerConfig,
    cost: &C,
    x0: &DVector<f64>,
    u0: &DVector<f64>,
) -> Result<ClosedLoopRun> {
    let h = cfg.horizon;
    if h == 0 {
        return Err(Error::InvalidArgument("controller horizon must be at least 1".into()));
    }
    if cfg.g_hat.shape() != (sys.p(), sys.m()) {
        return Err(Error::dimension(
            "G_hat",
            format!("{}x{}", sys.p(), sys.m()),
            format!("{}x{}", cfg.g_hat.nrows(), cfg.g_hat.ncols()),
        ));
    }
    if cost.input_dim() != sys.m() || cost.output_dim() != sys.p() {
        return Err(Error::dimension(
            "cost dimensions",
            format!("({}, {})", sys.m(), sys.p()),
            format!("({}, {})", cost.input_dim(), cost.output_dim()),
        ));
    }
    if x0.len() != sys.n() {
        return Err(Error::dimension("x0", sys.n(), x0.len()));
    }
    if w.dim() != sys.r() {
        return Err(Error::dimension("w", sys.r(), w.dim()));
    }
    if w.len() < h {
        return Err(Error::dimension("w length", format!(">= {h}"), w.len()));
    }
    let mut u_sig = DMatrix::zeros(sys.m(), h);
    let mut x_sig = DMatrix::zeros(sys.n(), h + 1);
    let mut y_sig = DMatrix::zeros(sys.p(), h);
    let mut x = x0.clone();
    let mut u = cfg.constraint.project(u0)?;
    x_sig.set_column(0, &x);
    for k in 0..h {
        let wk = w.sample(k).into_owned();
        let (next, y) = sys.step(&x, &u, &wk);
        u_sig.set_column(k, &u);
        y_sig.set_column(k, &y);
        x_sig.set_column(k + 1, &next);
        u = projected_step(k, &u, &y, cfg, cost)?;
        x = next;
    }
    Ok(ClosedLoopRun {
        trajectory: Trajectory {
            u: Signal::from_matrix(u_sig),
            w: w.slice(0..h)?,
            x: Signal::from_matrix(x_sig),
            y: Signal::from_matrix(y_sig),
        },
        final_input: u,
    })
}

/// [`closed_loop_run_signals`] with a seeded disturbance process.
pub fn closed_loop_run<C: CostModel + ?Sized>(
    sys: &LtiSystem,
    w: &DisturbanceProcess,
    cfg: &ControllerConfig,
    cost: &C,
    x0: &DVector<f64>,
    u0: &DVector<f64>,
) -> Result<ClosedLoopRun> {
    let real = w.realize(cfg.horizon)?;
    closed_loop_run_signals(sys, &real.samples, cfg, cost, x0, u0)
}

/// Admissible step sizes `lower < η ≤ upper` (or `< upper` when
/// `upper_inclusive` is false).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EtaInterval {
    pub lower: f64,
    pub upper: f64,
    pub upper_inclusive: bool,
}

impl EtaInterval {
    pub fn contains(&self, eta: f64) -> bool {
        eta > self.lower && (eta < self.upper || (self.upper_inclusive && eta == self.upper))
    }

    pub fn is_empty(&self) -> bool {
        !(self.lower < self.upper || (self.upper_inclusive && self.lower < self.upper))
    }

    /// A representative interior point (the midpoint, or the upper end when
    /// it is included and the midpoint would be tiny).
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }
}

/// Step-size conditions that make both contraction factors smaller than one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GainFeasibility {
    /// `ℓ̂ = ℓᵤ∇ + ‖Ĝ‖ℓ_y∇`.
    pub ell_hat: f64,
    /// `‖G - Ĝ‖` (spectral norm) used in the check.
    pub mismatch: f64,
    /// Interval where the input contraction factor is below one.
    pub beta1_interval: Option<EtaInterval>,
    /// Open-loop state contraction factor `ρ_x`.
    pub rho_x: f64,
    /// Strict upper bound on η from the state contraction factor.
    pub beta2_cap: Option<f64>,
    /// Intersection of both conditions.
    pub interval: Option<EtaInterval>,
    /// Violated conditions, in words.
    pub violations: Vec<String>,
}

impl GainFeasibility {
    pub fn is_feasible(&self) -> bool {
        self.interval.is_some()
    }

    /// Error naming the violated condition if `eta` is not admissible.
    pub fn require(&self, eta: f64) -> Result<()> {
        match &self.interval {
            None => Err(Error::InfeasibleGain(self.violations.join("; "))),
            Some(iv) if !iv.contains(eta) => Err(Error::InfeasibleGain(format!(
                "η = {eta} outside the admissible interval ({}, {}{}",
                iv.lower,
                iv.upper,
                if iv.upper_inclusive { "]" } else { ")" }
            ))),
            Some(_) => Ok(()),
        }
    }
}

/// `ρ_x = sqrt((λ̄(P)/λ̲(P)) (1 - (1-κ) λ̲(Q)/λ̄(P)))`.
pub fn state_contraction(cert: &LyapunovCertificate, kappa: f64) -> f64 {
    let inner = (cert.p_max() / cert.p_min()) * (1.0 - (1.0 - kappa) * cert.q_min() / cert.p_max());
    inner.max(0.0).sqrt()
}

/// Step sizes for which both contraction factors are below one.
///
/// The input condition is solved exactly: for mismatch `d > 0`,
/// `sqrt(1 - ημ) + ηℓ̂d < 1` on `(0, 1/μ]` iff `η > (2ℓ̂d - μ)/(ℓ̂d)²`,
/// and it has solutions iff `d < μ/ℓ̂`.
pub fn gain_feasibility(
    constants: &CostConstants,
    g_hat: &DMatrix<f64>,
    mismatch: f64,
    c_norm: f64,
    cert: &LyapunovCertificate,
    kappa: f64,
) -> Result<GainFeasibility> {
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(Error::InvalidArgument(format!("κ must lie in (0, 1), got {kappa}")));
    }
    if !(mismatch >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "mismatch must be nonnegative, got {mismatch}"
        )));
    }
    constants.validate()?;
    let mu = constants.mu;
    let ell_hat = constants.ell_hat(g_hat);
    let mut violations = Vec::new();

    let beta1_interval = if mismatch == 0.0 || ell_hat == 0.0 {
        Some(EtaInterval {
            lower: 0.0,
            upper: 1.0 / mu,
            upper_inclusive: true,
        })
    } else if ell_hat * mismatch >= mu {
        violations.push(format!("‖G - Ĝ‖ = {mismatch} is not below μ/ℓ̂ = {}", mu / ell_hat));
        None
    } else {
        let ld = ell_hat * mismatch;
        Some(EtaInterval {
            lower: ((2.0 * ld - mu) / (ld * ld)).max(0.0),
            upper: 1.0 / mu,
            upper_inclusive: true,
        })
    };

    let rho_x = state_contraction(cert, kappa);
    let beta2_cap = if rho_x >= 1.0 {
        violations.push(format!(
            "open-loop state factor ρ_x = {rho_x} is not below one for κ = {kappa}"
        ));
        None
    } else if ell_hat * c_norm == 0.0 {
        Some(f64::INFINITY)
    } else {
        Some((1.0 - rho_x) / (ell_hat * c_norm))
    };

    let interval = match (beta1_interval, beta2_cap) {
        (Some(b1), Some(cap)) => {
            let (upper, upper_inclusive) = if cap <= b1.upper {
                (cap, false)
            } else {
                (b1.upper, true)
            };
            let iv = EtaInterval {
                lower: b1.lower,
                upper,
                upper_inclusive,
            };
            if iv.lower < iv.upper {
                Some(iv)
            } else {
                violations.push(format!(
                    "input condition needs η > {} but the state condition needs η < {cap}",
                    b1.lower
                ));
                None
            }
        }
        _ => None,
    };

    Ok(GainFeasibility {
        ell_hat,
        mismatch,
        beta1_interval,
        rho_x,
        beta2_cap,
        interval,
        violations,
    })
}
