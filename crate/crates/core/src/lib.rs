//! Data-driven steady-state gain estimation and online feedback optimization
//! for stochastic LTI plants.
//!
//! The crate is organised bottom-up:
//!
//! - [`lti`]: plant model, simulation, steady-state and Lyapunov oracles
//! - [`hankel`]: block-Hankel matrices and persistency of excitation
//! - [`estimation`]: recovering `G = C(I-A)^{-1}B` from input/output data
//! - [`feedback`]: cost models, convex sets and the gradient controller
//! - [`tracking`]: stable optimizers, gap bounds and tracking certificates
//! - [`rideshare`]: fleet pricing case study
//! - [`experiments`]: the Monte Carlo and scenario drivers used by the CLI

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimation;
pub mod experiments;
pub mod feedback;
pub mod hankel;
pub mod linalg;
pub mod lti;
pub mod rideshare;
pub mod signal;
pub mod tracking;

pub use error::{Error, Result};
pub use estimation::{EstimationMethod, TransferEstimate};
pub use feedback::{ControllerConfig, ConvexSet, CostModel, QuadraticCost};
pub use hankel::HankelMatrix;
pub use lti::{DisturbanceKind, DisturbanceProcess, LtiSystem, LyapunovCertificate, SystemDims, Trajectory};
pub use signal::Signal;
pub use tracking::{StableOptimizerRecord, TrackingConstants};
