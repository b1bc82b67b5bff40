use thiserror::Error;

use crate::lp::LpError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown allocation-set kind '{0}'")]
    UnknownKind(String),
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid allocation set: {0}")]
    InvalidAllocationSet(String),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("invalid menu: {0}")]
    InvalidMenu(String),
    #[error("invalid piecewise-linear function: {0}")]
    InvalidFunction(String),
    #[error("operation requires {0}")]
    Unsupported(String),
    #[error("enumeration needs {needed} assignments, cap is {cap}; reduce the support or bound the value with solve_rev on the convex hull")]
    CapExceeded { needed: u128, cap: u128 },
    #[error("linear program failed: {0}")]
    Lp(#[from] LpError),
    #[error("no feasible gradient in the allocation set at grid point {0:?}")]
    NoFeasibleGradient(Vec<f64>),
    #[error("no coordinatewise-maximal active gradient at {0:?}")]
    NoCoordinatewiseMax(Vec<f64>),
    #[error("schema error: {0}")]
    Schema(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
