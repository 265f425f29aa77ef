//! ReLU networks as data, and compilers from expressions to networks.

mod build;
pub(crate) mod network;

use thiserror::Error;

use crate::cpwl::CpwlError;
use crate::decompose::DecomposeError;

pub use build::{
    compile_expr, compile_min_depth, max_tree, min_depth_expression, richer_witness, witness_value,
};
pub use network::{eval_network, homogenize, network_stats, Layer, NetworkStats, ReluNetwork};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompileError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("layer {layer} does not match the width of its predecessor")]
    LayerShape { layer: usize },
    #[error("the output layer must have exactly one row")]
    MultiOutput,
    #[error("max of an empty list of terms")]
    EmptyTerms,
    #[error("witness dimension {0} is not a power of two at least 4")]
    WitnessSize(usize),
    #[error("compiled network has {depth} hidden layers, above the bound {bound}")]
    DepthExceeded { depth: usize, bound: usize },
    #[error("invalid network JSON: {0}")]
    Json(String),
    #[error(transparent)]
    Expr(#[from] CpwlError),
    #[error(transparent)]
    Decompose(#[from] DecomposeError),
}
