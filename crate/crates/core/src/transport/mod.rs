//! Entropic optimal transport between discrete measures.
//!
//! The solver works on dual potentials in the log domain, so ε can be driven
//! far below the cost scale without the overflow that plagues the classical
//! scaling-vector form. Costs implement [`TransportCost`]: a dense
//! [`CostMatrix`] for arbitrary supports, or a [`GridCost`] that exploits
//! the axis-separable squared-Euclidean kernel on a regular grid.
//!
//! [`exact_lp`] is a small-instance linear-programming solver used as a
//! reference when checking the entropic plans.

mod cost;
mod exact;
mod plan;
mod sinkhorn;

use thiserror::Error;

use crate::measure::MeasureError;

pub use cost::{build_cost_matrix, CostMatrix, GridCost, TransportCost};
pub use exact::{exact_lp, ExactSolution, EXACT_LP_MAX_ENTRIES};
pub use plan::{transport_cost, PlanEntries, TransportPlan};
pub use sinkhorn::{sinkhorn, solve_count, Epsilon, SinkhornOptions};

#[derive(Debug, Error)]
pub enum TransportError {
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("cost entries must be finite and nonnegative")]
    InvalidCost,
    #[error("measure has no atoms")]
    EmptyMeasure,
    #[error("unsupported cost exponent {0}; expected 1 or 2")]
    UnsupportedExponent(u32),
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("invalid sinkhorn options: {0}")]
    InvalidOptions(String),
    #[error("sinkhorn did not reach the marginal tolerance (violation {violation:e})")]
    NotConverged {
        violation: f64,
        plan: Box<TransportPlan>,
    },
    #[error("dual potentials became non-finite")]
    NumericalOverflow,
    #[error("instance with {0} cost entries exceeds the exact solver limit")]
    TooLarge(usize),
}
