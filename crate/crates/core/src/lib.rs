//! Bayesian single-parameter mechanism design: value distributions, feasibility
//! environments, the efficient, revenue-optimal and lazy-reserve VCG
//! mechanisms, and seeded numerical audits of revenue-to-welfare bounds and
//! the anti-concentration inequalities behind them.

// `!(x > 0.0)` is the NaN-rejecting parameter check used throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod anticonc;
pub mod cheby;
pub mod dist;
pub mod env;
pub mod error;
pub mod mech;
pub mod quad;
pub mod report;
pub mod rng;
pub mod sim;
pub mod stats;

pub use dist::{Distribution, DistributionKind};
pub use env::{AgentSet, FeasibilityEnvironment};
pub use error::{Error, Result};
pub use stats::EstimateWithCI;
