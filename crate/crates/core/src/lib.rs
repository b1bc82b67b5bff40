//! Revenue-maximizing single-buyer mechanisms over a compact allocation set.
//!
//! Mechanisms are finite menus of `(allocation, payment)` offers. The crate
//! verifies incentive constraints, solves for optimal revenue on
//! finite-support valuations, and traces pointwise limits of mechanism
//! sequences. Everything is generic over [`Scalar`] so the same code runs in
//! exact rational arithmetic or in `f64` with an explicit tolerance.

pub mod allocation;
pub mod convergence;
pub mod convexfn;
pub mod error;
pub mod grid;
pub mod io;
pub mod lp;
pub mod mechanism;
pub mod numeric;
pub mod random;
pub mod solver;
pub mod valuation;
pub mod vecops;

pub use allocation::{AllocationKind, AllocationSet, Halfspace, StandardKind};
pub use convexfn::{AffinePiece, PwlConvex, SubgradientSet};
pub use error::{Error, Result};
pub use numeric::{NumericMode, Rational, Scalar};
pub use mechanism::{Choice, Mechanism, Menu, MenuItem, Outcome, TieRule, VerificationReport, Violation, ViolationKind};
pub use valuation::DiscreteValuation;
pub use solver::{ClassLabel, MonotoneMode, SolveClass, SolveResult};
pub use convergence::{ConvergenceReport, MechanismSequence, PriceSchedule};
