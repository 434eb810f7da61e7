use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::feedback::{ConvexSet, CostConstants, CostModel};
use crate::linalg;
use crate::tracking::stable_optimizer_retraining;

use super::demand::DemandProfile;
use super::graph::{difference_operator, reduced_system, RegionGraph};

/// Negative profit plus an idle-vehicle penalty, per slot:
///
/// ```text
/// φ_k(p, y) = -Σ_ij (p_ij - c_ij) δ^ij_k (1 - θ_ij p_ij / p_max_ij) + ϱ‖y‖²
/// ```
///
/// `y` is the idle occupancy. Coordinates whose curvature `2δθ/p_max` falls
/// below `ε_μ` get an extra `½(ε_μ - 2δθ/p_max)(p - c)²` so the cost stays
/// strongly convex.
#[derive(Debug, Clone)]
pub struct PricingCost {
    n_regions: usize,
    c: DVector<f64>,
    p_max: DVector<f64>,
    theta: DVector<f64>,
    delta: Vec<DVector<f64>>,
    rho: f64,
    eps_mu: f64,
    constants: CostConstants,
    regularized: usize,
}

impl PricingCost {
    fn delta(&self, k: usize) -> &DVector<f64> {
        &self.delta[k.min(self.delta.len() - 1)]
    }

    fn regularizer(&self, k: usize, idx: usize) -> f64 {
        let curv = 2.0 * self.delta(k)[idx] * self.theta[idx] / self.p_max[idx];
        (self.eps_mu - curv).max(0.0)
    }

    /// Number of (slot, pair) coordinates that needed the `ε_μ` term.
    pub fn regularized_coordinates(&self) -> usize {
        self.regularized
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Profit `Σ (p - c) d(p)` at the nominal demand of slot `k`.
    pub fn nominal_profit(&self, k: usize, p: &DVector<f64>) -> f64 {
        let d = self.delta(k);
        (0..p.len())
            .map(|i| (p[i] - self.c[i]) * d[i] * (1.0 - self.theta[i] * p[i] / self.p_max[i]))
            .sum()
    }
}

impl CostModel for PricingCost {
    fn input_dim(&self) -> usize {
        self.c.len()
    }
    fn output_dim(&self) -> usize {
        self.n_regions
    }
    fn value(&self, k: usize, p: &DVector<f64>, y: &DVector<f64>) -> f64 {
        let reg: f64 = (0..p.len())
            .map(|i| 0.5 * self.regularizer(k, i) * (p[i] - self.c[i]).powi(2))
            .sum();
        -self.nominal_profit(k, p) + reg + self.rho * y.norm_squared()
    }
    fn grad_u(&self, k: usize, p: &DVector<f64>, _y: &DVector<f64>) -> DVector<f64> {
        let d = self.delta(k);
        DVector::from_fn(p.len(), |i, _| {
            let slope = d[i] * self.theta[i] / self.p_max[i];
            -d[i] + slope * (2.0 * p[i] - self.c[i]) + self.regularizer(k, i) * (p[i] - self.c[i])
        })
    }
    fn grad_y(&self, _k: usize, _p: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        y * (2.0 * self.rho)
    }
    fn constants(&self) -> CostConstants {
        self.constants
    }
}

fn pair_vector(graph: &RegionGraph, m: &DMatrix<f64>) -> DVector<f64> {
    let pairs = graph.pairs();
    DVector::from_fn(pairs.len(), |idx, _| m[(pairs[idx].0, pairs[idx].1)])
}

/// Pricing cost for the nominal demand profile and the price box `[0, p_max]`.
pub fn build_pricing_cost(
    graph: &RegionGraph,
    demand: &DemandProfile,
    rho: f64,
    eps_mu: f64,
) -> Result<(PricingCost, ConvexSet)> {
    if !(rho >= 0.0) {
        return Err(Error::InvalidArgument(format!("ϱ must be nonnegative, got {rho}")));
    }
    if !(eps_mu > 0.0) {
        return Err(Error::InvalidArgument(format!("ε_μ must be positive, got {eps_mu}")));
    }
    if demand.n_regions() != graph.n_regions() || demand.horizon() == 0 {
        return Err(Error::dimension(
            "demand regions",
            graph.n_regions(),
            demand.n_regions(),
        ));
    }
    let c = pair_vector(graph, graph.c());
    let p_max = pair_vector(graph, graph.p_max());
    let theta = pair_vector(graph, graph.theta());
    let delta: Vec<DVector<f64>> = (0..demand.horizon())
        .map(|k| pair_vector(graph, demand.slot(k)))
        .collect();

    let mut mu = f64::INFINITY;
    let mut ell_u: f64 = 0.0;
    let mut regularized = 0;
    for d in &delta {
        for i in 0..c.len() {
            let curv = 2.0 * d[i] * theta[i] / p_max[i];
            if curv < eps_mu {
                regularized += 1;
            }
            let eff = curv.max(eps_mu);
            mu = mu.min(eff);
            ell_u = ell_u.max(eff);
        }
    }
    if regularized > 0 {
        log::info!("pricing cost: {regularized} slot/pair coordinates regularized with ε_μ = {eps_mu}");
    }
    let n = graph.n_regions();
    let constants = CostConstants {
        mu,
        // idle occupancy lives in [0, 1]^n
        ell: 2.0 * rho * (n as f64).sqrt(),
        ell_u_grad: ell_u,
        ell_y_grad: 2.0 * rho,
    };
    let set = ConvexSet::Box {
        lower: vec![0.0; c.len()],
        upper: p_max.iter().copied().collect(),
    };
    Ok((
        PricingCost {
            n_regions: n,
            c,
            p_max,
            theta,
            delta,
            rho,
            eps_mu,
            constants,
            regularized,
        },
        set,
    ))
}

/// Model-based sensitivity of the steady idle occupancy to prices, at the
/// demand `mean_demand` and mean trip duration `mean_travel` (in slots).
///
/// Raising `p_ij` lowers departures from `i` and arrivals at `j` by
/// `δθ/p_max`, and returns `τ̄ δθ/p_max` of in-transit mass to the idle pool.
pub fn nominal_gain(graph: &RegionGraph, mean_demand: &DMatrix<f64>, mean_travel: f64) -> Result<DMatrix<f64>> {
    let n = graph.n_regions();
    let pairs = graph.pairs();
    let reduced = reduced_system(graph)?;
    let tf = reduced.transfer_closed_form()?;
    let mut b_p = DMatrix::zeros(n, pairs.len());
    let mut dm = DMatrix::zeros(1, pairs.len());
    for (idx, &(i, j)) in pairs.iter().enumerate() {
        let slope = mean_demand[(i, j)] * graph.theta()[(i, j)] / graph.p_max()[(i, j)];
        b_p[(i, idx)] = slope;
        b_p[(j, idx)] = -slope;
        dm[(0, idx)] = mean_travel * slope;
    }
    let t_pinv = linalg::pseudo_inverse(&difference_operator(n))?;
    let mass_col = tf.h.column(n).into_owned();
    let reduced_part = &tf.g * &b_p + mass_col * &dm;
    Ok(t_pinv * reduced_part + DMatrix::from_element(n, 1, 1.0 / n as f64) * dm)
}

/// Minimizer of `φ_k(p, Ĝp + y_offset)` over the price box.
pub fn optimal_prices(
    cost: &PricingCost,
    k: usize,
    g_hat: &DMatrix<f64>,
    y_offset: &DVector<f64>,
    set: &ConvexSet,
) -> Result<DVector<f64>> {
    let n = y_offset.len();
    let (p, _) = stable_optimizer_retraining(
        cost,
        k,
        g_hat,
        g_hat,
        &DMatrix::identity(n, n),
        y_offset,
        set,
        &cost.c.clone(),
    )?;
    Ok(p)
}
