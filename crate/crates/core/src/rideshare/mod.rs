//! Ride-service pricing case study.
//!
//! Idle vehicles move between regions by a fixed rebalancing rule and by
//! serving rides whose acceptance falls linearly with price. The service
//! provider prices each origin/destination pair with the projected feedback
//! controller, using only the measured idle occupancy.

mod demand;
mod fleet;
mod graph;
mod pricing;
mod scenario;

pub use demand::{accepted_demand, DemandProfile, SyntheticDay};
pub use fleet::{fleet_step, FleetState, StepReport, Transit};
pub use graph::{reduced_system, RegionGraph};
pub use pricing::{build_pricing_cost, nominal_gain, optimal_prices, PricingCost};
pub use scenario::{run_policy, run_policy_comparison, PolicyComparison, PolicyKind, RideshareScenario, SlotStats};
