//! Exact rational toolkit for continuous piecewise-linear (CPWL) functions.
//!
//! The crate covers the round trip between max-affine expressions, ReLU
//! networks and Newton polytopes, together with the mixed-integer model
//! that certifies a depth lower bound for `max{0, x1, x2, x3, x4}` under
//! the H-conformity assumption. Every computation is carried out over
//! [`Rational`]; there is no floating point anywhere.

pub mod compile;
pub mod cpwl;
pub mod decompose;
pub mod depthgate;
pub mod geometry;
pub mod linalg;

pub use compile::{NetworkStats, ReluNetwork};
pub use cpwl::{AffineTerm, CpwlExpr, MaxTerm};
pub use geometry::PointSet;
pub use linalg::{RatMatrix, RatVector, Rational};
