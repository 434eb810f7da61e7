use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

use super::graph::RegionGraph;

/// Vehicles on a trip, returning to `destination` idle at slot
/// `arrival_slot + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Transit {
    pub destination: usize,
    pub arrival_slot: usize,
    pub volume: f64,
}

/// Idle occupancy per region (fleet-normalized) and the in-transit ledger.
#[derive(Debug, Clone, PartialEq)]
pub struct FleetState {
    pub slot: usize,
    pub idle: DVector<f64>,
    pub in_transit: Vec<Transit>,
}

impl FleetState {
    pub fn new(idle: DVector<f64>) -> Result<Self> {
        if idle.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidArgument("idle occupancy must be nonnegative".into()));
        }
        Ok(Self {
            slot: 0,
            idle,
            in_transit: Vec::new(),
        })
    }

    /// Evenly spread fleet of total mass one.
    pub fn uniform(n_regions: usize) -> Self {
        Self {
            slot: 0,
            idle: DVector::from_element(n_regions, 1.0 / n_regions as f64),
            in_transit: Vec::new(),
        }
    }

    pub fn transit_mass(&self) -> f64 {
        self.in_transit.iter().map(|t| t.volume).sum()
    }

    pub fn total_mass(&self) -> f64 {
        self.idle.sum() + self.transit_mass()
    }
}

/// What happened in one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    /// Rides served per pair.
    pub served: DMatrix<f64>,
    /// Requested rides that found no idle vehicle.
    pub shortfall: f64,
    /// Mass removed by clipping negative occupancies.
    pub clipped: f64,
}

/// Advance one slot.
///
/// 1. Each region keeps `(1 - Σ_j a_ij) x_i` and serves requests from that
///    share, rationing proportionally when requests exceed it.
/// 2. Rebalancing moves `a_ij x_i` to `j`; served trips leave the idle pool
///    and enter the ledger with arrival slot `k + τ_ij`.
/// 3. Ledger entries with arrival slot `k` return to their destination.
/// 4. The exogenous change `e` is added and negative occupancies are clipped.
pub fn fleet_step(
    state: &FleetState,
    graph: &RegionGraph,
    requested: &DMatrix<f64>,
    travel: &[Vec<usize>],
    max_travel: usize,
    e: &DVector<f64>,
) -> Result<(FleetState, StepReport)> {
    let n = graph.n_regions();
    if state.idle.len() != n {
        return Err(Error::dimension("idle occupancy", n, state.idle.len()));
    }
    if requested.shape() != (n, n) {
        return Err(Error::dimension(
            "requested demand",
            format!("{n}x{n}"),
            format!("{}x{}", requested.nrows(), requested.ncols()),
        ));
    }
    if e.len() != n {
        return Err(Error::dimension("e", n, e.len()));
    }
    if travel.len() != n || travel.iter().any(|row| row.len() != n) {
        return Err(Error::dimension("travel times", format!("{n}x{n}"), travel.len()));
    }
    let k = state.slot;
    let a = graph.a();
    let x = &state.idle;

    let mut served = DMatrix::zeros(n, n);
    let mut shortfall = 0.0;
    let mut next = DVector::zeros(n);
    let mut ledger: Vec<Transit> = Vec::with_capacity(state.in_transit.len() + n * n);
    for i in 0..n {
        let keep = (1.0 - a.row(i).sum()) * x[i];
        let asked: f64 = (0..n).filter(|&j| j != i).map(|j| requested[(i, j)]).sum();
        let ratio = if asked > keep && asked > 0.0 { keep / asked } else { 1.0 };
        shortfall += (asked - keep).max(0.0);
        let mut departed = 0.0;
        for j in (0..n).filter(|&j| j != i) {
            let s = requested[(i, j)] * ratio;
            if s > 0.0 {
                let tau = travel[i][j];
                if tau == 0 || tau > max_travel {
                    return Err(Error::InvalidArgument(format!(
                        "travel time {tau} for pair ({i}, {j}) outside 1..={max_travel}"
                    )));
                }
                served[(i, j)] = s;
                departed += s;
                ledger.push(Transit {
                    destination: j,
                    arrival_slot: k + tau,
                    volume: s,
                });
            }
        }
        next[i] += keep - departed;
        for j in (0..n).filter(|&j| j != i) {
            next[j] += a[(i, j)] * x[i];
        }
    }
    for t in &state.in_transit {
        if t.arrival_slot == k {
            next[t.destination] += t.volume;
        } else {
            ledger.push(t.clone());
        }
    }
    next += e;
    let mut clipped = 0.0;
    for v in next.iter_mut() {
        if *v < 0.0 {
            clipped -= *v;
            *v = 0.0;
        }
    }
    if clipped > 0.0 {
        log::debug!("slot {k}: clipped {clipped:.3e} of negative occupancy");
    }
    Ok((
        FleetState {
            slot: k + 1,
            idle: next,
            in_transit: ledger,
        },
        StepReport {
            served,
            shortfall,
            clipped,
        },
    ))
}
