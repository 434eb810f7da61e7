use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feedback::{projected_step, ControllerConfig, ConvexSet, CostModel};
use crate::lti::seeded_rng;
use crate::signal::csv_to_error;

use super::demand::{accepted_demand, DemandProfile, SyntheticDay};
use super::fleet::{fleet_step, FleetState};
use super::graph::RegionGraph;
use super::pricing::{build_pricing_cost, nominal_gain, PricingCost};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    Adaptive,
    FixedMarkup,
}

impl PolicyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Adaptive => "adaptive",
            PolicyKind::FixedMarkup => "fixed",
        }
    }
}

/// Everything needed to simulate one pricing day.
#[derive(Debug, Clone)]
pub struct RideshareScenario {
    pub graph: RegionGraph,
    /// Nominal (forecast) potential demand, fleet-normalized.
    pub demand: DemandProfile,
    /// Relative half-width of the multiplicative demand noise.
    pub demand_noise: f64,
    /// Trip durations are uniform on `travel_min..=travel_max` slots.
    pub travel_min: usize,
    pub travel_max: usize,
    /// Idle-vehicle penalty ϱ.
    pub rho: f64,
    /// Markup of the fixed policy over the routing cost.
    pub markup: f64,
    /// Controller step; defaults to `0.5 / ℓᵤ∇`.
    pub eta: Option<f64>,
    pub eps_mu: f64,
}

impl RideshareScenario {
    /// Four regions on a ring with symmetric rebalancing, routing costs just
    /// under 3/4 of the cap, and the two-peak synthetic day scaled so the
    /// fleet is a quarter of the peak demand.
    pub fn synthetic_default() -> Result<Self> {
        let n = 4;
        let a = DMatrix::from_fn(n, n, |i, j| {
            let d = i.abs_diff(j);
            if d == 1 || d == n - 1 {
                0.05
            } else {
                0.0
            }
        });
        let mut rng = seeded_rng(11);
        let c = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { rng.random_range(0.72..0.76) });
        let off = |v: f64| DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { v });
        let graph = RegionGraph::new(a, c, off(1.0), off(1.0))?;
        let demand = SyntheticDay::default().generate()?;
        Ok(Self {
            graph,
            demand,
            demand_noise: 0.2,
            travel_min: 1,
            travel_max: 2,
            rho: 0.05,
            markup: 0.25,
            eta: None,
            eps_mu: 1e-3,
        })
    }

    fn validate(&self) -> Result<()> {
        if self.travel_min == 0 || self.travel_max < self.travel_min {
            return Err(Error::InvalidArgument(
                "travel times need 1 ≤ travel_min ≤ travel_max".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.demand_noise) {
            return Err(Error::InvalidArgument("demand noise must lie in [0, 1)".into()));
        }
        if !(self.markup >= 0.0) {
            return Err(Error::InvalidArgument("markup must be nonnegative".into()));
        }
        if self.demand.n_regions() != self.graph.n_regions() {
            return Err(Error::dimension(
                "demand regions",
                self.graph.n_regions(),
                self.demand.n_regions(),
            ));
        }
        Ok(())
    }

    pub fn mean_travel(&self) -> f64 {
        0.5 * (self.travel_min + self.travel_max) as f64
    }

    fn fixed_prices(&self, set: &ConvexSet) -> Result<DVector<f64>> {
        let pairs = self.graph.pairs();
        let raw = DVector::from_fn(pairs.len(), |idx, _| {
            let (i, j) = pairs[idx];
            (1.0 + self.markup) * self.graph.c()[(i, j)]
        });
        set.project(&raw)
    }

    /// Pricing cost, price box and adaptive controller settings.
    pub fn controller(&self) -> Result<(PricingCost, ControllerConfig)> {
        let (cost, set) = build_pricing_cost(&self.graph, &self.demand, self.rho, self.eps_mu)?;
        let g_hat = nominal_gain(&self.graph, &self.demand.mean(), self.mean_travel())?;
        let eta = self.eta.unwrap_or(0.5 / cost.constants().ell_u_grad);
        let cfg = ControllerConfig::new(eta, g_hat, set, self.demand.horizon())?;
        Ok((cost, cfg))
    }
}

/// Per-slot outcome of one policy.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct SlotStats {
    pub slot: usize,
    pub accepted: f64,
    pub profit: f64,
    /// Mean of `p / p_max` over pairs.
    pub mean_price: f64,
    /// Share of the fleet not idle.
    pub utilization: f64,
    pub shortfall: f64,
}

/// One seeded day under one policy.
#[derive(Debug, Clone)]
pub struct PolicyRun {
    pub stats: Vec<SlotStats>,
    pub prices: Vec<DVector<f64>>,
    /// Largest per-step change of total fleet mass.
    pub mass_drift: f64,
}

impl PolicyRun {
    pub fn total_profit(&self) -> f64 {
        self.stats.iter().map(|s| s.profit).sum()
    }
    pub fn total_accepted(&self) -> f64 {
        self.stats.iter().map(|s| s.accepted).sum()
    }
}

struct Draws {
    multipliers: Vec<DMatrix<f64>>,
    travel: Vec<Vec<Vec<usize>>>,
}

fn draw_exogenous(s: &RideshareScenario, seed: u64) -> Draws {
    let n = s.graph.n_regions();
    let mut rng = seeded_rng(seed);
    let mut multipliers = Vec::with_capacity(s.demand.horizon());
    let mut travel = Vec::with_capacity(s.demand.horizon());
    for _ in 0..s.demand.horizon() {
        multipliers.push(DMatrix::from_fn(n, n, |_, _| {
            1.0 + s.demand_noise * rng.random_range(-1.0..=1.0)
        }));
        travel.push(
            (0..n)
                .map(|_| (0..n).map(|_| rng.random_range(s.travel_min..=s.travel_max)).collect())
                .collect(),
        );
    }
    Draws { multipliers, travel }
}

/// Simulate one day. Both policies see identical demand noise and trip
/// durations for the same seed.
pub fn run_policy(s: &RideshareScenario, policy: PolicyKind, seed: u64) -> Result<PolicyRun> {
    s.validate()?;
    let (cost, cfg) = s.controller()?;
    let draws = draw_exogenous(s, seed);
    let pairs = s.graph.pairs();
    let n = s.graph.n_regions();
    let zero_e = DVector::zeros(n);

    let mut state = FleetState::uniform(n);
    let mut price = s.fixed_prices(&cfg.constraint)?;
    let mut stats = Vec::with_capacity(s.demand.horizon());
    let mut prices = Vec::with_capacity(s.demand.horizon());
    let mut mass_drift: f64 = 0.0;
    for k in 0..s.demand.horizon() {
        let nominal = s.demand.slot(k);
        let mut requested = DMatrix::zeros(n, n);
        for (idx, &(i, j)) in pairs.iter().enumerate() {
            let delta = nominal[(i, j)] * draws.multipliers[k][(i, j)];
            requested[(i, j)] = accepted_demand(delta, s.graph.theta()[(i, j)], price[idx], s.graph.p_max()[(i, j)])?;
        }
        let before = state.total_mass();
        let (next, report) = fleet_step(&state, &s.graph, &requested, &draws.travel[k], s.travel_max, &zero_e)?;
        mass_drift = mass_drift.max((next.total_mass() - before).abs());

        let mut profit = 0.0;
        let mut mean_price = 0.0;
        for (idx, &(i, j)) in pairs.iter().enumerate() {
            profit += (price[idx] - s.graph.c()[(i, j)]) * report.served[(i, j)];
            mean_price += price[idx] / s.graph.p_max()[(i, j)];
        }
        stats.push(SlotStats {
            slot: k,
            accepted: report.served.sum(),
            profit,
            mean_price: mean_price / pairs.len() as f64,
            utilization: 1.0 - state.idle.sum(),
            shortfall: report.shortfall,
        });
        prices.push(price.clone());

        if policy == PolicyKind::Adaptive {
            price = projected_step(k, &price, &state.idle, &cfg, &cost)?;
        }
        state = next;
    }
    Ok(PolicyRun {
        stats,
        prices,
        mass_drift,
    })
}

/// Seed-averaged series of both policies.
#[derive(Debug, Clone)]
pub struct PolicyComparison {
    pub adaptive: Vec<SlotStats>,
    pub fixed: Vec<SlotStats>,
    /// Per-seed `(adaptive, fixed)` cumulative profit.
    pub cumulative_profit: Vec<(f64, f64)>,
    /// Per-seed `(adaptive, fixed)` accepted rides.
    pub cumulative_accepted: Vec<(f64, f64)>,
    /// Largest per-step mass change over all runs.
    pub mass_drift: f64,
    /// Whether every adaptive price stayed in `[0, p_max]`.
    pub prices_feasible: bool,
}

impl PolicyComparison {
    pub fn mean_profit(&self) -> (f64, f64) {
        mean_pair(&self.cumulative_profit)
    }

    pub fn mean_accepted(&self) -> (f64, f64) {
        mean_pair(&self.cumulative_accepted)
    }

    /// `slot,policy,accepted,profit,mean_price,utilization`
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["slot", "policy", "accepted", "profit", "mean_price", "utilization"])
            .map_err(csv_to_error)?;
        for (policy, series) in [
            (PolicyKind::Adaptive, &self.adaptive),
            (PolicyKind::FixedMarkup, &self.fixed),
        ] {
            for s in series {
                wtr.write_record(&[
                    s.slot.to_string(),
                    policy.as_str().to_string(),
                    s.accepted.to_string(),
                    s.profit.to_string(),
                    s.mean_price.to_string(),
                    s.utilization.to_string(),
                ])
                .map_err(csv_to_error)?;
            }
        }
        wtr.flush()?;
        Ok(())
    }
}

fn mean_pair(v: &[(f64, f64)]) -> (f64, f64) {
    let n = v.len().max(1) as f64;
    let (a, b) = v.iter().fold((0.0, 0.0), |acc, x| (acc.0 + x.0, acc.1 + x.1));
    (a / n, b / n)
}

fn average(runs: &[&PolicyRun]) -> Vec<SlotStats> {
    let horizon = runs[0].stats.len();
    let n = runs.len() as f64;
    (0..horizon)
        .map(|k| {
            let mut acc = SlotStats {
                slot: k,
                ..Default::default()
            };
            for r in runs {
                let s = &r.stats[k];
                acc.accepted += s.accepted / n;
                acc.profit += s.profit / n;
                acc.mean_price += s.mean_price / n;
                acc.utilization += s.utilization / n;
                acc.shortfall += s.shortfall / n;
            }
            acc
        })
        .collect()
}

/// Run both policies for every seed (in parallel) and average in seed order.
pub fn run_policy_comparison(s: &RideshareScenario, seeds: &[u64]) -> Result<PolicyComparison> {
    if seeds.is_empty() {
        return Err(Error::InvalidArgument("at least one seed is required".into()));
    }
    let (_, cfg) = s.controller()?;
    let runs: Vec<(PolicyRun, PolicyRun)> = seeds
        .par_iter()
        .map(|&seed| {
            Ok((
                run_policy(s, PolicyKind::Adaptive, seed)?,
                run_policy(s, PolicyKind::FixedMarkup, seed)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let adaptive: Vec<&PolicyRun> = runs.iter().map(|r| &r.0).collect();
    let fixed: Vec<&PolicyRun> = runs.iter().map(|r| &r.1).collect();
    let prices_feasible = adaptive
        .iter()
        .all(|r| r.prices.iter().all(|p| cfg.constraint.contains(p, 0.0)));
    Ok(PolicyComparison {
        adaptive: average(&adaptive),
        fixed: average(&fixed),
        cumulative_profit: runs.iter().map(|(a, f)| (a.total_profit(), f.total_profit())).collect(),
        cumulative_accepted: runs
            .iter()
            .map(|(a, f)| (a.total_accepted(), f.total_accepted()))
            .collect(),
        mass_drift: runs
            .iter()
            .map(|(a, f)| a.mass_drift.max(f.mass_drift))
            .fold(0.0, f64::max),
        prices_feasible,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_demand_earns_nothing() {
        let mut s = RideshareScenario::synthetic_default().unwrap();
        s.demand = DemandProfile::zeros(4, 20, 5.0);
        let cmp = run_policy_comparison(&s, &[1, 2]).unwrap();
        assert_eq!(cmp.mean_profit(), (0.0, 0.0));
        assert!(cmp.mass_drift < 1e-12);
    }

    #[test]
    fn prohibitive_markup_loses_to_adaptive() {
        let mut s = RideshareScenario::synthetic_default().unwrap();
        // (1 + 0.5) c ≥ 1.08 > p_max / θ, so the fixed price is the cap
        s.markup = 0.5;
        s.demand = s.demand.scaled(0.5);
        let fixed = run_policy(&s, PolicyKind::FixedMarkup, 3).unwrap();
        assert_eq!(fixed.total_profit(), 0.0);
        assert_eq!(fixed.total_accepted(), 0.0);
        let adaptive = run_policy(&s, PolicyKind::Adaptive, 3).unwrap();
        assert!(adaptive.total_profit() > 0.0);
    }

    #[test]
    fn runs_are_deterministic_and_feasible() {
        let s = RideshareScenario::synthetic_default().unwrap();
        let a = run_policy(&s, PolicyKind::Adaptive, 5).unwrap();
        let b = run_policy(&s, PolicyKind::Adaptive, 5).unwrap();
        assert_eq!(a.stats, b.stats);
        assert!(a.prices.iter().all(|p| p.iter().all(|v| (0.0..=1.0).contains(v))));
        assert!(a.mass_drift < 1e-12);
    }
}
