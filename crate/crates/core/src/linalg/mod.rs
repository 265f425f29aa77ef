//! Exact rational linear algebra and linear programming.

mod lp;
mod matrix;
mod rational;
pub(crate) mod simplex;
mod solve;

use thiserror::Error;

pub use lp::{lp_max, lp_max_with, Bounds, LpProblem, LpResult, Sense};
pub use matrix::RatMatrix;
pub use matrix::RatVector;

pub use rational::{rat, ParseRationalError, Rational};
pub use simplex::PivotRule;
pub use solve::{affine_dependence, rank, solve_linear, AffineDependence, SolveResult};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LinalgError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("points are affinely independent")]
    NoAffineDependence,
    #[error("variable {var} has lower bound above upper bound")]
    MalformedBounds { var: usize },
}
