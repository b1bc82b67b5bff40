//! Menus, the mechanisms they induce, and constraint verification.

use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::allocation::AllocationSet;
use crate::convexfn::{active_indices, AffinePiece, PwlConvex};
use crate::error::{Error, Result};
use crate::numeric::{approx_eq, approx_le, cmp_scalar, Scalar};
use crate::valuation::DiscreteValuation;
use crate::vecops::{dot, leq, lex_cmp, zeros};

#[derive(Clone, Debug, PartialEq)]
pub struct MenuItem<S> {
    pub allocation: Vec<S>,
    pub payment: S,
}

impl<S: Scalar> MenuItem<S> {
    pub fn new(allocation: Vec<S>, payment: S) -> Self {
        Self { allocation, payment }
    }

    /// Buyer payoff `allocation · x - payment`.
    pub fn utility(&self, x: &[S]) -> S {
        dot(&self.allocation, x) - self.payment.clone()
    }

    fn cmp_key(&self, other: &Self) -> Ordering {
        lex_cmp(&self.allocation, &other.allocation).then_with(|| cmp_scalar(&self.payment, &other.payment))
    }
}

/// A finite, nonempty, deduplicated list of offers with allocations in Γ.
#[derive(Clone, Debug)]
pub struct Menu<S> {
    items: Vec<MenuItem<S>>,
    gamma: Arc<AllocationSet<S>>,
}

impl<S: Scalar> PartialEq for Menu<S> {
    fn eq(&self, other: &Self) -> bool {
        self.items == other.items
    }
}

impl<S: Scalar> Menu<S> {
    pub fn new(gamma: Arc<AllocationSet<S>>, mut items: Vec<MenuItem<S>>) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::InvalidMenu("a menu needs at least one item".into()));
        }
        let tol = S::tol();
        for item in &items {
            if item.allocation.len() != gamma.dim() {
                return Err(Error::DimensionMismatch {
                    expected: gamma.dim(),
                    got: item.allocation.len(),
                });
            }
            if !gamma.contains(&item.allocation, &tol) {
                return Err(Error::InvalidMenu(format!(
                    "allocation {:?} is not in the allocation set",
                    crate::vecops::to_f64_vec(&item.allocation)
                )));
            }
        }
        items.sort_by(|a, b| a.cmp_key(b));
        items.dedup();
        Ok(Self { items, gamma })
    }

    /// Skips the membership test; the caller knows every allocation is in Γ.
    pub(crate) fn from_trusted(gamma: Arc<AllocationSet<S>>, mut items: Vec<MenuItem<S>>) -> Self {
        items.sort_by(|a, b| a.cmp_key(b));
        items.dedup();
        Self { items, gamma }
    }

    /// The single offer "nothing for nothing". Needs 0 in Γ.
    pub fn null(gamma: Arc<AllocationSet<S>>) -> Result<Self> {
        let k = gamma.dim();
        Self::new(gamma, vec![MenuItem::new(zeros(k), S::zero())])
    }

    /// Null item plus every allocation in `offers` at its price.
    pub fn with_null(gamma: Arc<AllocationSet<S>>, offers: Vec<MenuItem<S>>) -> Result<Self> {
        let k = gamma.dim();
        let mut items = vec![MenuItem::new(zeros(k), S::zero())];
        items.extend(offers);
        Self::new(gamma, items)
    }

    pub fn items(&self) -> &[MenuItem<S>] {
        &self.items
    }

    pub fn gamma(&self) -> &Arc<AllocationSet<S>> {
        &self.gamma
    }

    pub fn dim(&self) -> usize {
        self.gamma.dim()
    }

    pub fn payoff(&self, x: &[S]) -> S {
        self.items
            .iter()
            .map(|it| it.utility(x))
            .reduce(S::max_of)
            .expect("nonempty")
    }

    /// The buyer payoff function as a max-affine function.
    pub fn payoff_function(&self) -> PwlConvex<S> {
        let pieces = self
            .items
            .iter()
            .map(|it| AffinePiece::new(it.allocation.clone(), -it.payment.clone()))
            .collect();
        PwlConvex::new(pieces).expect("menus are nonempty")
    }

    /// Adds `delta` to every payment.
    pub fn shift_payments(&self, delta: &S) -> Self {
        let items = self
            .items
            .iter()
            .map(|it| MenuItem::new(it.allocation.clone(), it.payment.clone() + delta.clone()))
            .collect();
        Self {
            items,
            gamma: self.gamma.clone(),
        }
    }

    /// Raises all payments by `b(0)` when the buyer would be paid at 0.
    pub fn normalize_npt(&self) -> Self {
        let b0 = self.payoff(&zeros(self.dim()));
        if b0 > S::zero() {
            self.shift_payments(&b0)
        } else {
            self.clone()
        }
    }

    /// Items that are the buyer's best choice at some point of the box
    /// `[lo, hi]`, judged by pairwise domination.
    pub fn prune_dominated(&self, lo: &[S], hi: &[S]) -> Self {
        let f = self.payoff_function().prune_dominated(lo, hi);
        let items = f
            .pieces()
            .iter()
            .map(|p| MenuItem::new(p.gradient.clone(), -p.intercept.clone()))
            .collect();
        Self {
            items,
            gamma: self.gamma.clone(),
        }
    }
}

/// How the buyer's tied best offers are resolved.
#[derive(Clone, Debug, PartialEq, Default)]
pub enum TieRule<S> {
    /// Highest payment, then lexicographically largest allocation.
    #[default]
    SellerFavorable,
    /// Componentwise largest active allocation when one exists, otherwise
    /// seller-favorable.
    CoordinatewiseMax,
    /// Lowest payment at the given point, seller-favorable elsewhere.
    AdverseAt(Vec<S>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Choice<S> {
    pub index: usize,
    pub allocation: Vec<S>,
    pub payment: S,
    /// Several payment-maximal offers with different allocations were tied
    /// and the lexicographic order decided.
    pub lexicographic: bool,
}

#[derive(Clone, Debug)]
pub struct Mechanism<S> {
    pub menu: Menu<S>,
    pub tie_rule: TieRule<S>,
}

/// What a type receives: its point, allocation and payment.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome<S> {
    pub point: Vec<S>,
    pub allocation: Vec<S>,
    pub payment: S,
}

impl<S: Scalar> Outcome<S> {
    pub fn utility(&self) -> S {
        dot(&self.allocation, &self.point) - self.payment.clone()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ViolationKind {
    Ic,
    Ir,
    Npt,
    MonoS,
    MonoQ,
}

impl ViolationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationKind::Ic => "IC",
            ViolationKind::Ir => "IR",
            ViolationKind::Npt => "NPT",
            ViolationKind::MonoS => "MONO_S",
            ViolationKind::MonoQ => "MONO_Q",
        }
    }
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation<S> {
    pub kind: ViolationKind,
    pub witness: Vec<Vec<S>>,
    /// Amount by which the constraint fails (positive).
    pub slack: S,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerificationReport<S> {
    pub passed: bool,
    pub violations: Vec<Violation<S>>,
    pub notes: Vec<String>,
}

impl<S: Scalar> Default for VerificationReport<S> {
    fn default() -> Self {
        Self {
            passed: true,
            violations: Vec::new(),
            notes: Vec::new(),
        }
    }
}

impl<S: Scalar> VerificationReport<S> {
    pub fn from_violations(mut violations: Vec<Violation<S>>) -> Self {
        violations.sort_by(|a, b| {
            a.kind.cmp(&b.kind).then_with(|| {
                a.witness
                    .iter()
                    .zip(&b.witness)
                    .map(|(x, y)| lex_cmp(x, y))
                    .find(|o| o.is_ne())
                    .unwrap_or(Ordering::Equal)
            })
        });
        Self {
            passed: violations.is_empty(),
            violations,
            notes: Vec::new(),
        }
    }

    pub fn merge(mut self, other: Self) -> Self {
        let mut all = std::mem::take(&mut self.violations);
        all.extend(other.violations);
        let mut merged = Self::from_violations(all);
        merged.notes = self.notes;
        merged.notes.extend(other.notes);
        merged
    }

    pub fn count(&self, kind: ViolationKind) -> usize {
        self.violations.iter().filter(|v| v.kind == kind).count()
    }
}

impl<S: Scalar> Mechanism<S> {
    pub fn new(menu: Menu<S>) -> Self {
        Self {
            menu,
            tie_rule: TieRule::SellerFavorable,
        }
    }

    pub fn with_tie_rule(menu: Menu<S>, tie_rule: TieRule<S>) -> Self {
        Self { menu, tie_rule }
    }

    pub fn gamma(&self) -> &Arc<AllocationSet<S>> {
        self.menu.gamma()
    }

    pub fn payoff(&self, x: &[S]) -> S {
        self.menu.payoff(x)
    }

    pub fn payoff_function(&self) -> PwlConvex<S> {
        self.menu.payoff_function()
    }

    pub fn choose(&self, x: &[S]) -> Choice<S> {
        let items = self.menu.items();
        let utilities: Vec<S> = items.iter().map(|it| it.utility(x)).collect();
        let active = active_indices(&utilities);
        match &self.tie_rule {
            TieRule::SellerFavorable => seller_favorable(items, &active),
            TieRule::CoordinatewiseMax => {
                let top = active.iter().skip(1).fold(items[active[0]].allocation.clone(), |acc, &i| {
                    crate::vecops::join(&acc, &items[i].allocation)
                });
                let holders: Vec<usize> = active
                    .iter()
                    .copied()
                    .filter(|&i| items[i].allocation == top)
                    .collect();
                if holders.is_empty() {
                    seller_favorable(items, &active)
                } else {
                    seller_favorable(items, &holders)
                }
            }
            TieRule::AdverseAt(p) => {
                let here = p.len() == x.len() && p.iter().zip(x).all(|(a, b)| approx_eq(a, b));
                if here {
                    let best = active
                        .iter()
                        .copied()
                        .min_by(|&i, &j| {
                            cmp_scalar(&items[i].payment, &items[j].payment)
                                .then_with(|| lex_cmp(&items[i].allocation, &items[j].allocation))
                        })
                        .expect("nonempty");
                    Choice {
                        index: best,
                        allocation: items[best].allocation.clone(),
                        payment: items[best].payment.clone(),
                        lexicographic: false,
                    }
                } else {
                    seller_favorable(items, &active)
                }
            }
        }
    }

    pub fn outcome(&self, x: &[S]) -> Outcome<S> {
        let c = self.choose(x);
        Outcome {
            point: x.to_vec(),
            allocation: c.allocation,
            payment: c.payment,
        }
    }

    pub fn outcomes(&self, points: &[Vec<S>]) -> Vec<Outcome<S>> {
        points.par_iter().map(|x| self.outcome(x)).collect()
    }

    /// `Σ w_i s(x_i)`; weights need not sum to one.
    pub fn expected_payment(&self, points: &[Vec<S>], weights: &[S]) -> S {
        let terms: Vec<S> = points
            .par_iter()
            .zip(weights)
            .map(|(x, w)| {
                if w.is_zero() {
                    S::zero()
                } else {
                    w.clone() * self.choose(x).payment
                }
            })
            .collect();
        S::sum_all(terms)
    }

    pub fn revenue(&self, dist: &DiscreteValuation<S>) -> S {
        self.expected_payment(dist.support(), dist.probs())
    }

    pub fn verify_ic(&self, points: &[Vec<S>]) -> VerificationReport<S> {
        verify_ic_outcomes(&self.outcomes(points), &[])
    }

    pub fn verify_ir(&self, points: &[Vec<S>]) -> VerificationReport<S> {
        verify_ir_outcomes(&self.outcomes(points))
    }

    /// NPT through `b(0) <= tol`; the witness is the offer taken at 0.
    pub fn verify_npt(&self) -> VerificationReport<S> {
        let origin = zeros(self.menu.dim());
        let b0 = self.payoff(&origin);
        if approx_le(&b0, &S::zero()) {
            return VerificationReport::default();
        }
        let c = self.choose(&origin);
        VerificationReport::from_violations(vec![Violation {
            kind: ViolationKind::Npt,
            witness: vec![origin, c.allocation],
            slack: -c.payment,
        }])
    }

    pub fn verify_all(&self, points: &[Vec<S>]) -> VerificationReport<S> {
        let outcomes = self.outcomes(points);
        verify_ic_outcomes(&outcomes, &[])
            .merge(verify_ir_outcomes(&outcomes))
            .merge(self.verify_npt())
    }

    pub fn verify_monotone_payment(&self, grid: &[Vec<S>]) -> VerificationReport<S> {
        verify_monotone_payment_outcomes(&self.outcomes(grid))
    }

    /// Allocation monotonicity on the grid, cross-checked against
    /// supermodularity of the payoff function and the coordinatewise-max
    /// selection.
    pub fn verify_monotone_allocation(&self, grid: &[Vec<S>]) -> VerificationReport<S> {
        let choices: Vec<Choice<S>> = grid.par_iter().map(|x| self.choose(x)).collect();
        let outcomes: Vec<Outcome<S>> = grid
            .iter()
            .zip(&choices)
            .map(|(x, c)| Outcome {
                point: x.clone(),
                allocation: c.allocation.clone(),
                payment: c.payment.clone(),
            })
            .collect();
        let mut report = verify_monotone_allocation_outcomes(&outcomes);

        let lex_points: Vec<&Vec<S>> = grid
            .iter()
            .zip(&choices)
            .filter(|(_, c)| c.lexicographic)
            .map(|(x, _)| x)
            .collect();
        if !report.passed {
            let lex_involved = report
                .violations
                .iter()
                .filter(|v| v.witness.iter().any(|w| lex_points.contains(&w)))
                .count();
            if lex_involved > 0 {
                report.notes.push(format!(
                    "{lex_involved} violation(s) involve points where the lexicographic tie layer decided the allocation"
                ));
            }
        } else if !lex_points.is_empty() {
            report.notes.push(format!(
                "result depends on the lexicographic tie layer at {} grid point(s)",
                lex_points.len()
            ));
        }

        let supermodular = self.payoff_function().check_supermodular(grid).supermodular;
        if supermodular != report.passed {
            report.notes.push(format!(
                "payoff function is {}supermodular on the grid but allocations are {}monotone",
                if supermodular { "" } else { "not " },
                if report.passed { "" } else { "not " },
            ));
        }

        let coord = Mechanism::with_tie_rule(self.menu.clone(), TieRule::CoordinatewiseMax);
        let differs = grid
            .iter()
            .zip(&choices)
            .filter(|(x, c)| coord.choose(x).allocation != c.allocation)
            .count();
        if differs > 0 {
            report.notes.push(format!(
                "coordinatewise-max selection differs at {differs} grid point(s)"
            ));
        }
        report
    }
}

fn seller_favorable<S: Scalar>(items: &[MenuItem<S>], candidates: &[usize]) -> Choice<S> {
    let max_pay = candidates
        .iter()
        .map(|&i| items[i].payment.clone())
        .reduce(S::max_of)
        .expect("nonempty");
    let floor = max_pay.clone() - S::active_slack(&max_pay);
    let top: Vec<usize> = candidates
        .iter()
        .copied()
        .filter(|&i| items[i].payment >= floor)
        .collect();
    let best = top
        .iter()
        .copied()
        .max_by(|&i, &j| {
            lex_cmp(&items[i].allocation, &items[j].allocation)
                .then_with(|| cmp_scalar(&items[i].payment, &items[j].payment))
        })
        .expect("nonempty");
    let lexicographic = top
        .iter()
        .any(|&i| items[i].allocation != items[best].allocation);
    Choice {
        index: best,
        allocation: items[best].allocation.clone(),
        payment: items[best].payment.clone(),
        lexicographic,
    }
}

/// Pairwise IC over an outcome table, plus deviations to extra offers.
pub fn verify_ic_outcomes<S: Scalar>(outcomes: &[Outcome<S>], offers: &[MenuItem<S>]) -> VerificationReport<S> {
    let violations = (0..outcomes.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            let me = &outcomes[i];
            let own = me.utility();
            let vs_types = outcomes.iter().enumerate().filter(move |(j, _)| *j != i).filter_map({
                let own = own.clone();
                move |(_, other)| {
                    let dev = dot(&other.allocation, &me.point) - other.payment.clone();
                    (!approx_le(&dev, &own)).then(|| Violation {
                        kind: ViolationKind::Ic,
                        witness: vec![me.point.clone(), other.point.clone()],
                        slack: dev - own.clone(),
                    })
                }
            });
            let vs_offers = offers.iter().filter_map(move |item| {
                let dev = item.utility(&me.point);
                (!approx_le(&dev, &own)).then(|| Violation {
                    kind: ViolationKind::Ic,
                    witness: vec![me.point.clone(), item.allocation.clone()],
                    slack: dev - own.clone(),
                })
            });
            vs_types.chain(vs_offers).collect::<Vec<_>>()
        })
        .collect();
    VerificationReport::from_violations(violations)
}

pub fn verify_ir_outcomes<S: Scalar>(outcomes: &[Outcome<S>]) -> VerificationReport<S> {
    let violations = outcomes
        .iter()
        .filter_map(|o| {
            let u = o.utility();
            (!approx_le(&S::zero(), &u)).then(|| Violation {
                kind: ViolationKind::Ir,
                witness: vec![o.point.clone()],
                slack: -u,
            })
        })
        .collect();
    VerificationReport::from_violations(violations)
}

/// Nonnegative payments in the table, and no offer that pays the buyer.
pub fn verify_npt_outcomes<S: Scalar>(outcomes: &[Outcome<S>], offers: &[MenuItem<S>]) -> VerificationReport<S> {
    let from_table = outcomes.iter().filter(|&o| !approx_le(&S::zero(), &o.payment)).map(|o| Violation {
            kind: ViolationKind::Npt,
            witness: vec![o.point.clone(), o.allocation.clone()],
            slack: -o.payment.clone(),
        });
    let from_offers = offers.iter().filter(|&it| !approx_le(&S::zero(), &it.payment)).map(|it| Violation {
            kind: ViolationKind::Npt,
            witness: vec![zeros(it.allocation.len()), it.allocation.clone()],
            slack: -it.payment.clone(),
        });
    let mut v: Vec<Violation<S>> = from_table.chain(from_offers).collect();
    v.dedup();
    VerificationReport::from_violations(v)
}

fn comparable_pairs<S: Scalar>(outcomes: &[Outcome<S>]) -> Vec<(usize, usize)> {
    (0..outcomes.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            (0..outcomes.len())
                .filter(move |&j| j != i && leq(&outcomes[i].point, &outcomes[j].point))
                .map(move |j| (i, j))
        })
        .collect()
}

/// `s(y) >= s(x)` whenever `x <= y`.
pub fn verify_monotone_payment_outcomes<S: Scalar>(outcomes: &[Outcome<S>]) -> VerificationReport<S> {
    let violations = comparable_pairs(outcomes)
        .into_iter()
        .filter_map(|(i, j)| {
            let (lo, hi) = (&outcomes[i], &outcomes[j]);
            (!approx_le(&lo.payment, &hi.payment)).then(|| Violation {
                kind: ViolationKind::MonoS,
                witness: vec![lo.point.clone(), hi.point.clone()],
                slack: lo.payment.clone() - hi.payment.clone(),
            })
        })
        .collect();
    VerificationReport::from_violations(violations)
}

/// `q(y) >= q(x)` componentwise whenever `x <= y`.
pub fn verify_monotone_allocation_outcomes<S: Scalar>(outcomes: &[Outcome<S>]) -> VerificationReport<S> {
    let violations = comparable_pairs(outcomes)
        .into_iter()
        .filter_map(|(i, j)| {
            let (lo, hi) = (&outcomes[i], &outcomes[j]);
            let worst = lo
                .allocation
                .iter()
                .zip(&hi.allocation)
                .map(|(a, b)| a.clone() - b.clone())
                .reduce(S::max_of)
                .expect("k >= 1");
            (!approx_le(&worst, &S::zero())).then(|| Violation {
                kind: ViolationKind::MonoQ,
                witness: vec![lo.point.clone(), hi.point.clone()],
                slack: worst,
            })
        })
        .collect();
    VerificationReport::from_violations(violations)
}
