//! Optimal revenue for finite-support valuations.
//!
//! [`solve_rev`] and the polytope branch of [`solve_monotone`] are linear
//! programs over per-type allocations and payments. [`solve_deterministic`]
//! enumerates allocations from a finite Γ and prices each assignment with a
//! shortest-path pass over its difference constraints. The single-good price
//! search lives in [`pricing`].

mod deterministic;
mod lp_rev;
pub mod pricing;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

pub use deterministic::{solve_deterministic, DEFAULT_CAP};
pub use lp_rev::solve_rev;
pub use pricing::{brev, bundle_price_menu, myerson_price, separate_price_menu, solve_brev, solve_srev, srev};

use crate::allocation::{AllocationKind, AllocationSet};
use crate::error::Result;
use crate::grid;
use crate::mechanism::{Mechanism, Menu, MenuItem, VerificationReport};
use crate::numeric::{approx_eq, NumericMode, Scalar};
use crate::valuation::DiscreteValuation;
use crate::vecops::zeros;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ClassLabel {
    Rev,
    Drev,
    Srev,
    Brev,
    MonrevUb,
    AmonrevUb,
}

impl ClassLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            ClassLabel::Rev => "REV",
            ClassLabel::Drev => "DREV",
            ClassLabel::Srev => "SREV",
            ClassLabel::Brev => "BREV",
            ClassLabel::MonrevUb => "MONREV_UB",
            ClassLabel::AmonrevUb => "AMONREV_UB",
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Mechanism class requested from the front end.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SolveClass {
    Rev,
    Drev,
    Srev,
    Brev,
    Mono,
    Amono,
}

impl SolveClass {
    pub const ALL: [SolveClass; 6] = [
        SolveClass::Rev,
        SolveClass::Drev,
        SolveClass::Srev,
        SolveClass::Brev,
        SolveClass::Mono,
        SolveClass::Amono,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SolveClass::Rev => "rev",
            SolveClass::Drev => "drev",
            SolveClass::Srev => "srev",
            SolveClass::Brev => "brev",
            SolveClass::Mono => "mono",
            SolveClass::Amono => "amono",
        }
    }
}

impl FromStr for SolveClass {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        SolveClass::ALL
            .into_iter()
            .find(|c| c.as_str() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| format!("unknown class '{s}' (expected rev, drev, srev, brev, mono or amono)"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MonotoneMode {
    Payment,
    Allocation,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Diagnostics {
    pub iterations: usize,
    pub variables: usize,
    pub constraints: usize,
    pub assignments: u128,
    pub verification_points: usize,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct SolveResult<S> {
    pub optimal_revenue: S,
    pub mechanism: Mechanism<S>,
    /// Menu item assigned to each support type, in support order.
    pub assignment: Vec<usize>,
    pub class_label: ClassLabel,
    pub certified: bool,
    pub numeric_mode: NumericMode,
    pub diagnostics: Diagnostics,
}

/// Dispatches on the requested class.
pub fn solve<S: Scalar>(
    class: SolveClass,
    gamma: &Arc<AllocationSet<S>>,
    dist: &DiscreteValuation<S>,
    cap: u128,
) -> Result<SolveResult<S>> {
    match class {
        SolveClass::Rev => solve_rev(gamma, dist),
        SolveClass::Drev => solve_deterministic(gamma, dist, cap),
        SolveClass::Srev => solve_srev(gamma, dist),
        SolveClass::Brev => solve_brev(gamma, dist),
        SolveClass::Mono => solve_monotone(gamma, dist, MonotoneMode::Payment, cap),
        SolveClass::Amono => solve_monotone(gamma, dist, MonotoneMode::Allocation, cap),
    }
}

/// Like [`solve_rev`] with support-level monotonicity constraints added.
/// Reported as an upper bound, certified only when the witness passes the
/// global check on the verification grid.
pub fn solve_monotone<S: Scalar>(
    gamma: &Arc<AllocationSet<S>>,
    dist: &DiscreteValuation<S>,
    mode: MonotoneMode,
    cap: u128,
) -> Result<SolveResult<S>> {
    let mut result = match gamma.kind() {
        AllocationKind::Polytope => lp_rev::solve_lp(gamma, dist, Some(mode))?,
        AllocationKind::Finite => deterministic::enumerate(gamma, dist, cap, Some(mode))?,
    };
    result.class_label = match mode {
        MonotoneMode::Payment => ClassLabel::MonrevUb,
        MonotoneMode::Allocation => ClassLabel::AmonrevUb,
    };
    let grid = verification_points(dist);
    let report = match mode {
        MonotoneMode::Payment => result.mechanism.verify_monotone_payment(&grid),
        MonotoneMode::Allocation => result.mechanism.verify_monotone_allocation(&grid),
    };
    if !report.passed {
        result.diagnostics.notes.push(format!(
            "witness fails {} monotonicity at {} grid pair(s)",
            match mode {
                MonotoneMode::Payment => "payment",
                MonotoneMode::Allocation => "allocation",
            },
            report.violations.len()
        ));
    }
    result.diagnostics.notes.extend(report.notes);
    result.certified = result.certified && report.passed;
    Ok(result)
}

/// Verification grid for a distribution, with its support and the origin.
pub fn verification_points<S: Scalar>(dist: &DiscreteValuation<S>) -> Vec<Vec<S>> {
    grid::with_points(grid::verification_grid(dist.support()), dist.support())
}

/// Builds the witness from per-type `(allocation, payment)` pairs and
/// checks it: IC/IR/NPT on the verification grid and revenue equal to the
/// solver's value.
pub(crate) fn finish<S: Scalar>(
    gamma: &Arc<AllocationSet<S>>,
    dist: &DiscreteValuation<S>,
    per_type: Vec<MenuItem<S>>,
    extra: Vec<MenuItem<S>>,
    optimal_revenue: S,
    class_label: ClassLabel,
    mut diagnostics: Diagnostics,
) -> Result<SolveResult<S>> {
    let mut items = per_type.clone();
    items.extend(extra);
    let menu = Menu::new(gamma.clone(), items)?;
    let assignment = per_type
        .iter()
        .map(|it| {
            menu.items()
                .iter()
                .position(|m| m == it)
                .expect("every per-type item is on the menu")
        })
        .collect();
    let mechanism = Mechanism::new(menu);
    let points = verification_points(dist);
    diagnostics.verification_points = points.len();
    let report: VerificationReport<S> = mechanism.verify_all(&points);
    let realized = mechanism.revenue(dist);
    let revenue_ok = approx_eq(&realized, &optimal_revenue);
    if !report.passed {
        diagnostics
            .notes
            .push(format!("witness has {} IC/IR/NPT violation(s)", report.violations.len()));
    }
    if !revenue_ok {
        diagnostics.notes.push(format!(
            "witness revenue {} differs from the optimum {}",
            realized.to_f64(),
            optimal_revenue.to_f64()
        ));
    }
    Ok(SolveResult {
        optimal_revenue,
        mechanism,
        assignment,
        class_label,
        certified: report.passed && revenue_ok,
        numeric_mode: S::MODE,
        diagnostics,
    })
}

/// Types used by the formulations: the support, then the origin with
/// weight zero when it is not already a support point.
pub(crate) fn types_with_origin<S: Scalar>(dist: &DiscreteValuation<S>) -> (Vec<Vec<S>>, Vec<S>) {
    let mut points = dist.support().to_vec();
    let mut weights = dist.probs().to_vec();
    let origin = zeros(dist.dim());
    if !points.contains(&origin) {
        points.push(origin);
        weights.push(S::zero());
    }
    (points, weights)
}
