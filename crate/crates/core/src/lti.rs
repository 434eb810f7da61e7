//! Discrete-time stochastic LTI plants
//!
//! ```text
//! x_{k+1} = A x_k + B u_k + E w_k
//! y_k     = C x_k + D w_k
//! ```
//!
//! with simulation, equilibrium and steady-state gain oracles, a discrete
//! Lyapunov solver, and the controllability/observability indices.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg;
use crate::signal::Signal;

/// Condition number of `I - A` above which solves are reported as
/// numerically delicate.
pub const CONDITIONING_WARNING: f64 = 1e12;

/// Relative rank tolerance for controllability/observability sweeps.
const STRUCTURAL_RANK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct LtiSystem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    d: DMatrix<f64>,
    e: DMatrix<f64>,
}

impl LtiSystem {
    /// Validate dimensions and Schur stability.
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, d: DMatrix<f64>, e: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || !a.is_square() {
            return Err(Error::dimension(
                "A",
                "non-empty square",
                format!("{}x{}", a.nrows(), a.ncols()),
            ));
        }
        if b.nrows() != n || b.ncols() == 0 {
            return Err(Error::dimension(
                "B",
                format!("{n}xm, m>0"),
                format!("{}x{}", b.nrows(), b.ncols()),
            ));
        }
        if c.ncols() != n || c.nrows() == 0 {
            return Err(Error::dimension(
                "C",
                format!("px{n}, p>0"),
                format!("{}x{}", c.nrows(), c.ncols()),
            ));
        }
        if e.nrows() != n || e.ncols() == 0 {
            return Err(Error::dimension(
                "E",
                format!("{n}xr, r>0"),
                format!("{}x{}", e.nrows(), e.ncols()),
            ));
        }
        if d.nrows() != c.nrows() || d.ncols() != e.ncols() {
            return Err(Error::dimension(
                "D",
                format!("{}x{}", c.nrows(), e.ncols()),
                format!("{}x{}", d.nrows(), d.ncols()),
            ));
        }
        let rho = linalg::spectral_radius(&a);
        if !(rho < 1.0) {
            return Err(Error::NotSchurStable(rho));
        }
        Ok(Self { a, b, c, d, e })
    }

    /// Scalar plant `x+ = a x + b u + e w`, `y = c x + d w`.
    pub fn scalar(a: f64, b: f64, c: f64, d: f64, e: f64) -> Result<Self> {
        let m = |v: f64| DMatrix::from_element(1, 1, v);
        Self::new(m(a), m(b), m(c), m(d), m(e))
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }
    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }
    pub fn d(&self) -> &DMatrix<f64> {
        &self.d
    }
    pub fn e(&self) -> &DMatrix<f64> {
        &self.e
    }
    pub fn n(&self) -> usize {
        self.a.nrows()
    }
    pub fn m(&self) -> usize {
        self.b.ncols()
    }
    pub fn p(&self) -> usize {
        self.c.nrows()
    }
    pub fn r(&self) -> usize {
        self.e.ncols()
    }

    pub fn spectral_radius(&self) -> f64 {
        linalg::spectral_radius(&self.a)
    }

    fn i_minus_a(&self) -> DMatrix<f64> {
        DMatrix::identity(self.n(), self.n()) - &self.a
    }

    fn check_conditioning(&self) -> f64 {
        let cond = linalg::condition_number(&self.i_minus_a());
        if cond > CONDITIONING_WARNING {
            log::warn!("I - A is ill-conditioned (cond = {cond:.3e}); steady-state solves may be inaccurate");
        }
        cond
    }

    /// One plant update: returns `(x_{k+1}, y_k)`.
    pub fn step(&self, x: &DVector<f64>, u: &DVector<f64>, w: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let y = &self.c * x + &self.d * w;
        let next = &self.a * x + &self.b * u + &self.e * w;
        (next, y)
    }

    /// Simulate with an explicit disturbance signal.
    pub fn simulate_signals(&self, x0: &DVector<f64>, u: &Signal, w: &Signal, horizon: usize) -> Result<Trajectory> {
        if horizon == 0 {
            return Err(Error::InvalidArgument("horizon must be at least 1".into()));
        }
        if x0.len() != self.n() {
            return Err(Error::dimension("x0", self.n(), x0.len()));
        }
        if u.dim() != self.m() {
            return Err(Error::dimension("u", self.m(), u.dim()));
        }
        if w.dim() != self.r() {
            return Err(Error::dimension("w", self.r(), w.dim()));
        }
        if u.len() < horizon {
            return Err(Error::dimension("u length", format!(">= {horizon}"), u.len()));
        }
        if w.len() < horizon {
            return Err(Error::dimension("w length", format!(">= {horizon}"), w.len()));
        }
        let mut x = DMatrix::zeros(self.n(), horizon + 1);
        let mut y = DMatrix::zeros(self.p(), horizon);
        x.set_column(0, x0);
        for k in 0..horizon {
            let xk = x.column(k).into_owned();
            let uk = u.sample(k).into_owned();
            let wk = w.sample(k).into_owned();
            let (next, yk) = self.step(&xk, &uk, &wk);
            x.set_column(k + 1, &next);
            y.set_column(k, &yk);
        }
        Ok(Trajectory {
            u: u.slice(0..horizon)?,
            w: w.slice(0..horizon)?,
            x: Signal::from_matrix(x),
            y: Signal::from_matrix(y),
        })
    }

    /// Simulate under a seeded disturbance process.
    pub fn simulate(
        &self,
        x0: &DVector<f64>,
        u: &Signal,
        w: &DisturbanceProcess,
        horizon: usize,
    ) -> Result<Trajectory> {
        if w.dim() != self.r() {
            return Err(Error::dimension("w", self.r(), w.dim()));
        }
        let realization = w.realize(horizon)?;
        self.simulate_signals(x0, u, &realization.samples, horizon)
    }

    /// Equilibrium `x̄ = (I-A)^{-1}(B ū + E w̄)`, `ȳ = C x̄ + D w̄`.
    pub fn equilibrium_state(&self, u_bar: &DVector<f64>, w_bar: &DVector<f64>) -> Result<Equilibrium> {
        if u_bar.len() != self.m() {
            return Err(Error::dimension("u_bar", self.m(), u_bar.len()));
        }
        if w_bar.len() != self.r() {
            return Err(Error::dimension("w_bar", self.r(), w_bar.len()));
        }
        let condition = self.check_conditioning();
        let rhs = &self.b * u_bar + &self.e * w_bar;
        let x = linalg::lu_solve_vec(&self.i_minus_a(), &rhs)?;
        let y = &self.c * &x + &self.d * w_bar;
        Ok(Equilibrium { x, y, condition })
    }

    /// Steady-state gains `G = C(I-A)^{-1}B` and `H = D + C(I-A)^{-1}E`.
    pub fn transfer_closed_form(&self) -> Result<TransferPair> {
        let condition = self.check_conditioning();
        let ima = self.i_minus_a();
        let g = &self.c * linalg::lu_solve(&ima, &self.b)?;
        let h = &self.d + &self.c * linalg::lu_solve(&ima, &self.e)?;
        Ok(TransferPair { g, h, condition })
    }

    /// `(I-A)^{-1} M` for an arbitrary right-hand side with `n` rows.
    pub fn resolvent_at_one(&self, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        linalg::lu_solve(&self.i_minus_a(), rhs)
    }

    /// Solve `A^T P A - P = -Q` for `P ≻ 0` (Smith doubling on the
    /// convergent series `Σ (A^T)^k Q A^k`).
    pub fn solve_discrete_lyapunov(&self, q: &DMatrix<f64>) -> Result<LyapunovCertificate> {
        let n = self.n();
        if q.shape() != (n, n) {
            return Err(Error::dimension(
                "Q",
                format!("{n}x{n}"),
                format!("{}x{}", q.nrows(), q.ncols()),
            ));
        }
        if linalg::asymmetry(q) > 1e-12 {
            return Err(Error::InvalidArgument("Q must be symmetric".into()));
        }
        let (q_min, _) = linalg::symmetric_eigen_extremes(q);
        if !(q_min > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "Q must be positive definite (smallest eigenvalue {q_min:.3e})"
            )));
        }

        let mut p = q.clone();
        let mut ak = self.a.clone();
        for _ in 0..100 {
            let increment = ak.transpose() * &p * &ak;
            let inc_norm = increment.norm();
            p += increment;
            ak = &ak * &ak;
            if inc_norm <= f64::EPSILON * p.norm() {
                break;
            }
        }
        let p = (&p + p.transpose()) * 0.5;
        let residual = (self.a.transpose() * &p * &self.a - &p + q).norm();
        if residual > 1e-9 * q.norm() {
            return Err(Error::Numerical(format!(
                "Lyapunov residual {residual:.3e} exceeds tolerance"
            )));
        }
        LyapunovCertificate::from_parts(p, q.clone(), residual)
    }

    /// Observability index ν and controllability index θ.
    pub fn structural_indices(&self) -> Result<StructuralIndices> {
        let n = self.n();
        let observability = {
            let mut blocks: Vec<DMatrix<f64>> = Vec::new();
            let mut cak = self.c.clone();
            let mut found = None;
            for k in 1..=n {
                blocks.push(cak.clone());
                let refs: Vec<&DMatrix<f64>> = blocks.iter().collect();
                let obs = linalg::vstack(&refs)?;
                if linalg::numerical_rank(&obs, STRUCTURAL_RANK_TOL) == n {
                    found = Some(k);
                    break;
                }
                cak = &cak * &self.a;
            }
            found.ok_or_else(|| Error::Structural("system is not observable".into()))?
        };
        let controllability = {
            let mut blocks: Vec<DMatrix<f64>> = Vec::new();
            let mut akb = self.b.clone();
            let mut found = None;
            for k in 1..=n {
                blocks.push(akb.transpose());
                let refs: Vec<&DMatrix<f64>> = blocks.iter().collect();
                let ctrb_t = linalg::vstack(&refs)?;
                if linalg::numerical_rank(&ctrb_t, STRUCTURAL_RANK_TOL) == n {
                    found = Some(k);
                    break;
                }
                akb = &self.a * &akb;
            }
            found.ok_or_else(|| Error::Structural("system is not controllable".into()))?
        };
        Ok(StructuralIndices {
            observability,
            controllability,
        })
    }

    /// Random plant with i.i.d. standard normal entries and `A` rescaled to a
    /// spectral radius drawn uniformly from `radius_range`.
    pub fn random<R: Rng + ?Sized>(dims: SystemDims, radius_range: (f64, f64), rng: &mut R) -> Result<Self> {
        let SystemDims { n, m, p, r } = dims;
        let mut normal =
            |rows: usize, cols: usize| DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal));
        let mut a = normal(n, n);
        let b = normal(n, m);
        let c = normal(p, n);
        let d = normal(p, r);
        let e = normal(n, r);
        let rho = linalg::spectral_radius(&a);
        if rho == 0.0 {
            return Err(Error::Numerical("random A has zero spectral radius".into()));
        }
        let target = rng.random_range(radius_range.0..=radius_range.1);
        a *= target / rho;
        Self::new(a, b, c, d, e)
    }

    /// Copy with `D` and `E` replaced (e.g. zeroed for noiseless studies).
    pub fn with_disturbance_channels(&self, d: DMatrix<f64>, e: DMatrix<f64>) -> Result<Self> {
        Self::new(self.a.clone(), self.b.clone(), self.c.clone(), d, e)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Deterministic seeded RNG used across the crate.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemDims {
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub r: usize,
}

#[derive(Debug, Clone)]
pub struct Equilibrium {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    /// Condition number of `I - A`.
    pub condition: f64,
}

#[derive(Debug, Clone)]
pub struct TransferPair {
    pub g: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub condition: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StructuralIndices {
    /// ν: smallest k with rank [C; CA; …; CA^{k-1}] = n.
    pub observability: usize,
    /// θ: smallest k with rank [B, AB, …, A^{k-1}B] = n.
    pub controllability: usize,
}

/// A solution pair of `A^T P A - P = -Q` with cached eigenvalue extremes.
#[derive(Debug, Clone)]
pub struct LyapunovCertificate {
    p: DMatrix<f64>,
    q: DMatrix<f64>,
    p_min: f64,
    p_max: f64,
    q_min: f64,
    residual: f64,
}

impl LyapunovCertificate {
    fn from_parts(p: DMatrix<f64>, q: DMatrix<f64>, residual: f64) -> Result<Self> {
        let (p_min, p_max) = linalg::symmetric_eigen_extremes(&p);
        let (q_min, _) = linalg::symmetric_eigen_extremes(&q);
        if !(p_min > 0.0) {
            return Err(Error::Numerical(format!(
                "Lyapunov solution is not positive definite (λmin = {p_min:.3e})"
            )));
        }
        Ok(Self {
            p,
            q,
            p_min,
            p_max,
            q_min,
            residual,
        })
    }

    pub fn p(&self) -> &DMatrix<f64> {
        &self.p
    }
    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }
    /// λ̲(P)
    pub fn p_min(&self) -> f64 {
        self.p_min
    }
    /// λ̄(P)
    pub fn p_max(&self) -> f64 {
        self.p_max
    }
    /// λ̲(Q)
    pub fn q_min(&self) -> f64 {
        self.q_min
    }
    /// Frobenius norm of `A^T P A - P + Q` at construction.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// `V(x) = x^T P x`.
    pub fn value(&self, x: &DVector<f64>) -> f64 {
        (x.transpose() * &self.p * x)[(0, 0)]
    }
}

/// Input, disturbance, state and output samples of one run.
///
/// `x` carries one more sample than `u`, `w` and `y`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub u: Signal,
    pub w: Signal,
    pub x: Signal,
    pub y: Signal,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    /// Largest violation of the plant equations over the run.
    pub fn replay_residual(&self, sys: &LtiSystem) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 0..self.len() {
            let xk = self.x.sample(k).into_owned();
            let (next, yk) = sys.step(&xk, &self.u.sample(k).into_owned(), &self.w.sample(k).into_owned());
            worst = worst
                .max((next - self.x.sample(k + 1)).amax())
                .max((yk - self.y.sample(k)).amax());
        }
        worst
    }
}

/// Family of the exogenous disturbance `w_k`. All supports are compact boxes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DisturbanceKind {
    /// `w_k = value` for all k.
    Constant { value: Vec<f64> },
    /// i.i.d. uniform on `center ± half_width`.
    IidBounded { center: Vec<f64>, half_width: Vec<f64> },
    /// Levels drawn uniformly from `[lower, upper]`, each held for `dwell`
    /// steps, plus optional i.i.d. uniform jitter of the given half-width.
    PiecewiseConstant {
        lower: Vec<f64>,
        upper: Vec<f64>,
        dwell: usize,
        #[serde(default)]
        jitter: Option<Vec<f64>>,
    },
    /// Explicit sequence, replayed as-is.
    ScriptedSequence { samples: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceProcess {
    #[serde(flatten)]
    pub kind: DisturbanceKind,
    #[serde(default)]
    pub seed: u64,
}

/// Samples of a disturbance together with the per-step mean of its law.
#[derive(Debug, Clone)]
pub struct DisturbanceRealization {
    pub samples: Signal,
    pub means: Signal,
}

impl DisturbanceProcess {
    pub fn new(kind: DisturbanceKind, seed: u64) -> Self {
        Self { kind, seed }
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(DisturbanceKind::Constant { value: vec![0.0; dim] }, 0)
    }

    pub fn constant(value: &[f64]) -> Self {
        Self::new(DisturbanceKind::Constant { value: value.to_vec() }, 0)
    }

    pub fn iid_box(center: &[f64], half_width: &[f64], seed: u64) -> Self {
        Self::new(
            DisturbanceKind::IidBounded {
                center: center.to_vec(),
                half_width: half_width.to_vec(),
            },
            seed,
        )
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            DisturbanceKind::Constant { value } => value.len(),
            DisturbanceKind::IidBounded { center, .. } => center.len(),
            DisturbanceKind::PiecewiseConstant { lower, .. } => lower.len(),
            DisturbanceKind::ScriptedSequence { samples } => samples.first().map(|s| s.len()).unwrap_or(0),
        }
    }

    fn validate(&self) -> Result<()> {
        let dim = self.dim();
        let check = |name: &str, v: &[f64]| {
            if v.len() != dim {
                Err(Error::dimension(name, dim, v.len()))
            } else if v.iter().any(|x| !x.is_finite()) {
                Err(Error::InvalidArgument(format!("{name} must be finite")))
            } else {
                Ok(())
            }
        };
        match &self.kind {
            DisturbanceKind::Constant { value } => check("value", value),
            DisturbanceKind::IidBounded { center, half_width } => {
                check("center", center)?;
                check("half_width", half_width)?;
                if half_width.iter().any(|h| *h < 0.0) {
                    return Err(Error::InvalidArgument("half_width must be nonnegative".into()));
                }
                Ok(())
            }
            DisturbanceKind::PiecewiseConstant {
                lower,
                upper,
                dwell,
                jitter,
            } => {
                check("lower", lower)?;
                check("upper", upper)?;
                if lower.iter().zip(upper).any(|(l, u)| l > u) {
                    return Err(Error::InvalidArgument("lower must not exceed upper".into()));
                }
                if *dwell == 0 {
                    return Err(Error::InvalidArgument("dwell must be positive".into()));
                }
                if let Some(j) = jitter {
                    check("jitter", j)?;
                    if j.iter().any(|h| *h < 0.0) {
                        return Err(Error::InvalidArgument("jitter must be nonnegative".into()));
                    }
                }
                Ok(())
            }
            DisturbanceKind::ScriptedSequence { samples } => {
                for (k, s) in samples.iter().enumerate() {
                    check(&format!("samples[{k}]"), s)?;
                }
                Ok(())
            }
        }
    }

    /// Draw `horizon` samples. Deterministic in `(kind, seed)`.
    pub fn realize(&self, horizon: usize) -> Result<DisturbanceRealization> {
        self.validate()?;
        let dim = self.dim();
        let mut rng = seeded_rng(self.seed);
        let mut samples = DMatrix::zeros(dim, horizon);
        let mut means = DMatrix::zeros(dim, horizon);
        match &self.kind {
            DisturbanceKind::Constant { value } => {
                for k in 0..horizon {
                    for i in 0..dim {
                        samples[(i, k)] = value[i];
                        means[(i, k)] = value[i];
                    }
                }
            }
            DisturbanceKind::IidBounded { center, half_width } => {
                for k in 0..horizon {
                    for i in 0..dim {
                        samples[(i, k)] = center[i] + half_width[i] * rng.random_range(-1.0..=1.0);
                        means[(i, k)] = center[i];
                    }
                }
            }
            DisturbanceKind::PiecewiseConstant {
                lower,
                upper,
                dwell,
                jitter,
            } => {
                let mut level = vec![0.0; dim];
                for k in 0..horizon {
                    if k % dwell == 0 {
                        for i in 0..dim {
                            level[i] = lower[i] + (upper[i] - lower[i]) * rng.random::<f64>();
                        }
                    }
                    for i in 0..dim {
                        let noise = match jitter {
                            Some(j) => j[i] * rng.random_range(-1.0..=1.0),
                            None => 0.0,
                        };
                        samples[(i, k)] = level[i] + noise;
                        means[(i, k)] = level[i];
                    }
                }
            }
            DisturbanceKind::ScriptedSequence { samples: seq } => {
                if seq.len() < horizon {
                    return Err(Error::InsufficientData(format!(
                        "scripted disturbance has {} samples, horizon {horizon} requested",
                        seq.len()
                    )));
                }
                for k in 0..horizon {
                    for i in 0..dim {
                        samples[(i, k)] = seq[k][i];
                        means[(i, k)] = seq[k][i];
                    }
                }
            }
        }
        Ok(DisturbanceRealization {
            samples: Signal::from_matrix(samples),
            means: Signal::from_matrix(means),
        })
    }
}

// JSON document layout: {"A": [[...]], "B": ..., "C": ..., "D": ..., "E": ...}
#[derive(Serialize, Deserialize)]
#[allow(non_snake_case)]
#[serde(deny_unknown_fields)]
struct LtiDocument {
    A: Vec<Vec<f64>>,
    B: Vec<Vec<f64>>,
    C: Vec<Vec<f64>>,
    D: Vec<Vec<f64>>,
    E: Vec<Vec<f64>>,
}

/// Row-major nested arrays to a matrix. Ragged input is rejected.
pub fn matrix_from_rows(name: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let ncols = rows.first().map(|r| r.len()).unwrap_or(0);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != ncols {
            return Err(Error::dimension(format!("{name} row {i}"), ncols, row.len()));
        }
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

pub fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

impl Serialize for LtiSystem {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        LtiDocument {
            A: matrix_to_rows(&self.a),
            B: matrix_to_rows(&self.b),
            C: matrix_to_rows(&self.c),
            D: matrix_to_rows(&self.d),
            E: matrix_to_rows(&self.e),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for LtiSystem {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let doc = LtiDocument::deserialize(deserializer)?;
        let conv = |name: &str, rows: &[Vec<f64>]| matrix_from_rows(name, rows).map_err(D::Error::custom);
        LtiSystem::new(
            conv("A", &doc.A)?,
            conv("B", &doc.B)?,
            conv("C", &doc.C)?,
            conv("D", &doc.D)?,
            conv("E", &doc.E)?,
        )
        .map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn scalar_half() -> LtiSystem {
        LtiSystem::scalar(0.5, 1.0, 1.0, 0.0, 0.0).unwrap()
    }

    #[test]
    fn one_step_delay() {
        let sys = LtiSystem::scalar(0.0, 1.0, 1.0, 0.0, 0.0).unwrap();
        let traj = sys
            .simulate(
                &DVector::zeros(1),
                &Signal::scalar(&[1.0, 1.0, 1.0]),
                &DisturbanceProcess::zero(1),
                3,
            )
            .unwrap();
        assert_eq!(traj.y.as_matrix().as_slice(), &[0.0, 1.0, 1.0]);
        assert_eq!(traj.replay_residual(&sys), 0.0);
    }

    #[test]
    fn geometric_limit_is_monotone() {
        let sys = scalar_half();
        let traj = sys
            .simulate(
                &DVector::zeros(1),
                &Signal::scalar(&[1.0; 60]),
                &DisturbanceProcess::zero(1),
                60,
            )
            .unwrap();
        let xs: Vec<f64> = traj.x.as_matrix().iter().copied().collect();
        assert!(xs.windows(2).all(|w| w[1] >= w[0]));
        assert!(xs.iter().all(|&x| x <= 2.0));
        assert_relative_eq!(*xs.last().unwrap(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn dimension_mismatch_names_field() {
        let sys = scalar_half();
        let err = sys
            .simulate(
                &DVector::zeros(2),
                &Signal::scalar(&[1.0]),
                &DisturbanceProcess::zero(1),
                1,
            )
            .unwrap_err();
        assert!(matches!(err, Error::Dimension { ref field, .. } if field == "x0"));
        let bad = LtiSystem::new(
            DMatrix::zeros(2, 2),
            DMatrix::zeros(3, 1),
            DMatrix::zeros(1, 2),
            DMatrix::zeros(1, 1),
            DMatrix::zeros(2, 1),
        )
        .unwrap_err();
        assert!(matches!(bad, Error::Dimension { ref field, .. } if field == "B"));
    }

    #[test]
    fn unstable_plant_rejected() {
        assert!(matches!(
            LtiSystem::scalar(1.0, 1.0, 1.0, 0.0, 0.0),
            Err(Error::NotSchurStable(_))
        ));
    }

    #[test]
    fn scalar_equilibrium_and_gain() {
        let sys = scalar_half();
        let eq = sys
            .equilibrium_state(&DVector::from_element(1, 1.0), &DVector::zeros(1))
            .unwrap();
        assert_relative_eq!(eq.x[0], 2.0, epsilon = 1e-15);
        assert_relative_eq!(eq.y[0], 2.0, epsilon = 1e-15);
        let zero = sys.equilibrium_state(&DVector::zeros(1), &DVector::zeros(1)).unwrap();
        assert_eq!(zero.x[0], 0.0);
        let tf = sys.transfer_closed_form().unwrap();
        assert_relative_eq!(tf.g[(0, 0)], 2.0, epsilon = 1e-15);
    }

    #[test]
    fn zero_a_gives_direct_gains() {
        let mut rng = seeded_rng(5);
        let base = LtiSystem::random(SystemDims { n: 3, m: 2, p: 2, r: 2 }, (0.3, 0.9), &mut rng).unwrap();
        let sys = LtiSystem::new(
            DMatrix::zeros(3, 3),
            base.b().clone(),
            base.c().clone(),
            base.d().clone(),
            base.e().clone(),
        )
        .unwrap();
        let tf = sys.transfer_closed_form().unwrap();
        assert_relative_eq!(tf.g, sys.c() * sys.b(), epsilon = 1e-14);
        assert_relative_eq!(tf.h, sys.d() + sys.c() * sys.e(), epsilon = 1e-14);
    }

    #[test]
    fn scalar_lyapunov() {
        let sys = scalar_half();
        let cert = sys.solve_discrete_lyapunov(&DMatrix::identity(1, 1)).unwrap();
        assert_relative_eq!(cert.p()[(0, 0)], 4.0 / 3.0, epsilon = 1e-14);
        let zero_a = LtiSystem::scalar(0.0, 1.0, 1.0, 0.0, 0.0).unwrap();
        let q = DMatrix::from_element(1, 1, 2.5);
        assert_relative_eq!(zero_a.solve_discrete_lyapunov(&q).unwrap().p()[(0, 0)], 2.5);
    }

    #[test]
    fn lyapunov_rejects_indefinite_q() {
        let sys = scalar_half();
        let q = DMatrix::from_element(1, 1, -1.0);
        assert!(matches!(
            sys.solve_discrete_lyapunov(&q),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn full_state_output_has_unit_observability_index() {
        let mut rng = seeded_rng(1);
        let base = LtiSystem::random(SystemDims { n: 3, m: 1, p: 3, r: 1 }, (0.3, 0.9), &mut rng).unwrap();
        let sys = LtiSystem::new(
            base.a().clone(),
            base.b().clone(),
            DMatrix::identity(3, 3),
            DMatrix::zeros(3, 1),
            base.e().clone(),
        )
        .unwrap();
        assert_eq!(sys.structural_indices().unwrap().observability, 1);
        let s = scalar_half().structural_indices().unwrap();
        assert_eq!((s.observability, s.controllability), (1, 1));
    }

    #[test]
    fn unobservable_system_is_a_typed_error() {
        let sys = LtiSystem::new(
            DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.3]),
            DMatrix::from_row_slice(2, 1, &[1.0, 1.0]),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            DMatrix::zeros(1, 1),
            DMatrix::zeros(2, 1),
        )
        .unwrap();
        assert!(matches!(sys.structural_indices(), Err(Error::Structural(_))));
    }

    #[test]
    fn json_layout() {
        let sys = LtiSystem::scalar(0.5, 1.0, 2.0, 0.0, 1.0).unwrap();
        let text = serde_json::to_string(&sys).unwrap();
        assert_eq!(text, r#"{"A":[[0.5]],"B":[[1.0]],"C":[[2.0]],"D":[[0.0]],"E":[[1.0]]}"#);
        assert_eq!(LtiSystem::from_json(&text).unwrap(), sys);
        assert!(LtiSystem::from_json(r#"{"A":[[1.5]],"B":[[1.0]],"C":[[2.0]],"D":[[0.0]],"E":[[1.0]]}"#).is_err());
    }

    #[test]
    fn scripted_disturbance_must_cover_horizon() {
        let w = DisturbanceProcess::new(
            DisturbanceKind::ScriptedSequence {
                samples: vec![vec![1.0], vec![2.0]],
            },
            0,
        );
        assert!(matches!(w.realize(3), Err(Error::InsufficientData(_))));
        assert_eq!(w.realize(2).unwrap().samples.as_matrix().as_slice(), &[1.0, 2.0]);
    }

    #[test]
    fn iid_samples_stay_in_box() {
        let w = DisturbanceProcess::iid_box(&[1.0, -1.0], &[0.5, 0.1], 9);
        let real = w.realize(500).unwrap();
        for k in 0..500 {
            let s = real.samples.sample(k);
            assert!((s[0] - 1.0).abs() <= 0.5 && (s[1] + 1.0).abs() <= 0.1);
        }
    }
}
