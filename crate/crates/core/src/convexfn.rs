//! Max-affine convex functions `f(x) = max_i (g_i · x + c_i)` on R^k.
//!
//! This is where the buyer payoff function of a menu lives: each menu item
//! `(g, t)` contributes the piece `g·x - t`.

use std::cmp::Ordering;

use rayon::prelude::*;

use crate::allocation::{AllocationKind, AllocationSet};
use crate::error::{Error, Result};
use crate::lp::{LinearProgram, Relation};
use crate::numeric::{approx_le, cmp_scalar, Scalar};
use crate::vecops::{dot, join, leq, lex_cmp, meet, to_f64_vec};

#[derive(Clone, Debug, PartialEq)]
pub struct AffinePiece<S> {
    pub gradient: Vec<S>,
    pub intercept: S,
}

impl<S: Scalar> AffinePiece<S> {
    pub fn new(gradient: Vec<S>, intercept: S) -> Self {
        Self { gradient, intercept }
    }

    pub fn value(&self, x: &[S]) -> S {
        dot(&self.gradient, x) + self.intercept.clone()
    }

    fn cmp_key(&self, other: &Self) -> Ordering {
        lex_cmp(&self.gradient, &other.gradient).then_with(|| cmp_scalar(&self.intercept, &other.intercept))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PwlConvex<S> {
    dim: usize,
    pieces: Vec<AffinePiece<S>>,
}

/// Gradients of the pieces attaining the maximum at a point; the
/// subdifferential is their convex hull.
#[derive(Clone, Debug, PartialEq)]
pub struct SubgradientSet<S> {
    pub active_gradients: Vec<Vec<S>>,
}

impl<S: Scalar> SubgradientSet<S> {
    pub fn len(&self) -> usize {
        self.active_gradients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active_gradients.is_empty()
    }

    pub fn contains(&self, g: &[S]) -> bool {
        self.active_gradients.iter().any(|a| a.as_slice() == g)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MembershipCertificate {
    /// Every piece gradient lies in Γ and f(0) = 0.
    AllGradientsInGamma,
    /// Checked point by point on the supplied probes.
    Probed,
}

#[derive(Clone, Debug)]
pub struct MembershipReport<S> {
    pub member: bool,
    pub value_at_origin: S,
    pub certificate: MembershipCertificate,
    /// Probe points where no subgradient lies in Γ.
    pub failures: Vec<Vec<S>>,
}

#[derive(Clone, Debug)]
pub struct SupermodularityReport<S> {
    pub supermodular: bool,
    /// `(x, y, deficit)` with `deficit = f(x) + f(y) - f(x∨y) - f(x∧y) > tol`.
    pub violations: Vec<(Vec<S>, Vec<S>, S)>,
}

impl<S: Scalar> PwlConvex<S> {
    /// Builds a function from its pieces; identical pieces are merged.
    pub fn new(mut pieces: Vec<AffinePiece<S>>) -> Result<Self> {
        let first = pieces
            .first()
            .ok_or_else(|| Error::InvalidFunction("at least one piece is required".into()))?;
        let dim = first.gradient.len();
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        if let Some(bad) = pieces.iter().find(|p| p.gradient.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: bad.gradient.len() });
        }
        pieces.sort_by(|a, b| a.cmp_key(b));
        pieces.dedup();
        Ok(Self { dim, pieces })
    }

    /// A linear function `g · x`.
    pub fn linear(gradient: Vec<S>) -> Result<Self> {
        Self::new(vec![AffinePiece::new(gradient, S::zero())])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn pieces(&self) -> &[AffinePiece<S>] {
        &self.pieces
    }

    pub fn evaluate(&self, x: &[S]) -> S {
        self.pieces
            .iter()
            .map(|p| p.value(x))
            .reduce(S::max_of)
            .expect("nonempty")
    }

    /// Indices of pieces within the active tolerance of the maximum.
    pub fn active_pieces(&self, x: &[S]) -> Vec<usize> {
        let values: Vec<S> = self.pieces.iter().map(|p| p.value(x)).collect();
        active_indices(&values)
    }

    pub fn subgradient_set(&self, x: &[S]) -> SubgradientSet<S> {
        let mut grads: Vec<Vec<S>> = self
            .active_pieces(x)
            .into_iter()
            .map(|i| self.pieces[i].gradient.clone())
            .collect();
        grads.dedup();
        SubgradientSet { active_gradients: grads }
    }

    /// `f'(x; y) = max { g·y : g in ∂f(x) }`.
    pub fn dir_derivative(&self, x: &[S], y: &[S]) -> S {
        self.subgradient_set(x)
            .active_gradients
            .iter()
            .map(|g| dot(g, y))
            .reduce(S::max_of)
            .expect("nonempty")
    }

    /// Active gradients that also attain `f'(x; y)`.
    pub fn direction_maximal_subgradients(&self, x: &[S], y: &[S]) -> SubgradientSet<S> {
        let active = self.subgradient_set(x).active_gradients;
        let values: Vec<S> = active.iter().map(|g| dot(g, y)).collect();
        let keep = active_indices(&values);
        SubgradientSet {
            active_gradients: keep.into_iter().map(|i| active[i].clone()).collect(),
        }
    }

    pub fn is_differentiable(&self, x: &[S]) -> bool {
        self.subgradient_set(x).len() == 1
    }

    /// Membership in B_Γ: `f(0) = 0` and a subgradient in Γ at every probe.
    ///
    /// If every piece gradient is in Γ the probes are skipped: gradients on
    /// the differentiability set lying in Γ already suffice.
    pub fn is_in_b_gamma(&self, gamma: &AllocationSet<S>, probes: &[Vec<S>]) -> MembershipReport<S> {
        let origin = vec![S::zero(); self.dim];
        let value_at_origin = self.evaluate(&origin);
        let zero_ok = value_at_origin.abs() <= S::tol();
        let tol = S::tol();
        if self.pieces.iter().all(|p| gamma.contains(&p.gradient, &tol)) {
            return MembershipReport {
                member: zero_ok,
                value_at_origin,
                certificate: MembershipCertificate::AllGradientsInGamma,
                failures: Vec::new(),
            };
        }
        let failures: Vec<Vec<S>> = probes
            .iter()
            .filter(|x| !hull_meets_gamma(&self.subgradient_set(x).active_gradients, gamma))
            .cloned()
            .collect();
        MembershipReport {
            member: zero_ok && failures.is_empty(),
            value_at_origin,
            certificate: MembershipCertificate::Probed,
            failures,
        }
    }

    /// Checks `f(x∨y) + f(x∧y) >= f(x) + f(y)` for every pair of grid points.
    pub fn check_supermodular(&self, grid: &[Vec<S>]) -> SupermodularityReport<S> {
        let values: Vec<S> = grid.iter().map(|x| self.evaluate(x)).collect();
        let mut violations: Vec<(Vec<S>, Vec<S>, S)> = (0..grid.len())
            .into_par_iter()
            .flat_map_iter(|i| {
                let values = &values;
                (i + 1..grid.len()).filter_map(move |j| {
                    let (x, y) = (&grid[i], &grid[j]);
                    if leq(x, y) || leq(y, x) {
                        return None;
                    }
                    let lhs = self.evaluate(&join(x, y)) + self.evaluate(&meet(x, y));
                    let rhs = values[i].clone() + values[j].clone();
                    (!approx_le(&rhs, &lhs)).then(|| (x.clone(), y.clone(), rhs - lhs))
                })
            })
            .collect();
        violations.sort_by(|a, b| lex_cmp(&a.0, &b.0).then_with(|| lex_cmp(&a.1, &b.1)));
        SupermodularityReport {
            supermodular: violations.is_empty(),
            violations,
        }
    }

    /// The componentwise maximum of the active gradients, which must itself
    /// be active (it is for supermodular functions).
    pub fn coordinatewise_max_subgradient(&self, x: &[S]) -> Result<Vec<S>> {
        let active = self.subgradient_set(x).active_gradients;
        let top = active
            .iter()
            .skip(1)
            .fold(active[0].clone(), |acc, g| join(&acc, g));
        if active.contains(&top) {
            Ok(top)
        } else {
            Err(Error::NoCoordinatewiseMax(to_f64_vec(x)))
        }
    }

    /// Drops pieces that lie strictly below some other piece everywhere on
    /// the box `[lo, hi]`. Only valid as a simplification inside the box.
    pub fn prune_dominated(&self, lo: &[S], hi: &[S]) -> Self {
        let below_on_box = |a: &AffinePiece<S>, b: &AffinePiece<S>| {
            // max over the box of (a - b) is separable per coordinate
            let mut worst = a.intercept.clone() - b.intercept.clone();
            for i in 0..self.dim {
                let d = a.gradient[i].clone() - b.gradient[i].clone();
                let at = if d > S::zero() { hi[i].clone() } else { lo[i].clone() };
                worst = worst + d * at;
            }
            worst < S::zero()
        };
        let kept: Vec<AffinePiece<S>> = self
            .pieces
            .iter()
            .filter(|a| !self.pieces.iter().any(|b| below_on_box(a, b)))
            .cloned()
            .collect();
        Self {
            dim: self.dim,
            pieces: kept,
        }
    }

    /// `f + h·x` for a linear `h` (a modular shift).
    pub fn add_linear(&self, h: &[S]) -> Self {
        let pieces = self
            .pieces
            .iter()
            .map(|p| AffinePiece::new(crate::vecops::add(&p.gradient, h), p.intercept.clone()))
            .collect();
        Self::new(pieces).expect("same shape")
    }
}

/// Indices whose value is within the active slack of the maximum.
pub(crate) fn active_indices<S: Scalar>(values: &[S]) -> Vec<usize> {
    let max = values.iter().cloned().reduce(S::max_of).expect("nonempty");
    let threshold = max.clone() - S::active_slack(&max);
    values
        .iter()
        .enumerate()
        .filter(|(_, v)| **v >= threshold)
        .map(|(i, _)| i)
        .collect()
}

/// Whether conv(gradients) intersects Γ.
fn hull_meets_gamma<S: Scalar>(gradients: &[Vec<S>], gamma: &AllocationSet<S>) -> bool {
    let tol = S::tol();
    if gradients.iter().any(|g| gamma.contains(g, &tol)) {
        return true;
    }
    match (gamma.kind(), gamma.halfspaces()) {
        (AllocationKind::Finite, _) => gamma
            .vertices()
            .iter()
            .any(|v| in_convex_hull(v, gradients)),
        (AllocationKind::Polytope, hs) => {
            // weights lambda over gradients, and (without halfspaces) mu over vertices
            let k = gamma.dim();
            let na = gradients.len();
            let nv = if hs.is_some() { 0 } else { gamma.vertices().len() };
            let mut lp = LinearProgram::<S>::new(na + nv);
            lp.add_constraint((0..na).map(|j| (j, S::one())).collect(), Relation::Eq, S::one());
            match hs {
                Some(hs) => {
                    for h in hs {
                        let row = (0..na)
                            .map(|j| (j, dot(&h.normal, &gradients[j])))
                            .collect();
                        lp.add_constraint(row, Relation::Le, h.offset.clone());
                    }
                    for i in 0..k {
                        let row = (0..na).map(|j| (j, gradients[j][i].clone())).collect();
                        lp.add_constraint(row, Relation::Ge, S::zero());
                    }
                }
                None => {
                    lp.add_constraint(
                        (na..na + nv).map(|j| (j, S::one())).collect(),
                        Relation::Eq,
                        S::one(),
                    );
                    for i in 0..k {
                        let mut row: Vec<(usize, S)> =
                            (0..na).map(|j| (j, gradients[j][i].clone())).collect();
                        row.extend(
                            gamma
                                .vertices()
                                .iter()
                                .enumerate()
                                .map(|(j, v)| (na + j, -v[i].clone())),
                        );
                        lp.add_constraint(row, Relation::Eq, S::zero());
                    }
                }
            }
            lp.solve().is_ok()
        }
    }
}

fn in_convex_hull<S: Scalar>(point: &[S], gradients: &[Vec<S>]) -> bool {
    let n = gradients.len();
    let mut lp = LinearProgram::<S>::new(n);
    lp.add_constraint((0..n).map(|j| (j, S::one())).collect(), Relation::Eq, S::one());
    for i in 0..point.len() {
        let row = (0..n).map(|j| (j, gradients[j][i].clone())).collect();
        lp.add_constraint(row, Relation::Eq, point[i].clone());
    }
    lp.solve().is_ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocation::StandardKind;
    use crate::numeric::Rational;

    fn q(n: i64) -> Rational {
        Rational::from_i64(n)
    }

    fn qv(v: &[i64]) -> Vec<Rational> {
        v.iter().map(|&x| q(x)).collect()
    }

    fn piece(g: &[i64], c: i64) -> AffinePiece<Rational> {
        AffinePiece::new(qv(g), q(c))
    }

    /// max(0, x - 2) in one dimension.
    fn hinge() -> PwlConvex<Rational> {
        PwlConvex::new(vec![piece(&[0], 0), piece(&[1], -2)]).unwrap()
    }

    #[test]
    fn evaluation_examples() {
        assert_eq!(hinge().evaluate(&qv(&[3])), q(1));
        assert_eq!(hinge().evaluate(&qv(&[-1])), q(0));
        let bundle = PwlConvex::new(vec![piece(&[1, 1], -2), piece(&[0, 0], 0)]).unwrap();
        let x = vec![Rational::from_ratio(3, 2); 2];
        assert_eq!(bundle.evaluate(&x), q(1));
    }

    #[test]
    fn subgradients_at_kink_and_smooth_point() {
        assert_eq!(hinge().subgradient_set(&qv(&[2])).active_gradients, vec![qv(&[0]), qv(&[1])]);
        assert_eq!(hinge().subgradient_set(&qv(&[5])).active_gradients, vec![qv(&[1])]);
    }

    #[test]
    fn directional_derivative_examples() {
        assert_eq!(hinge().dir_derivative(&qv(&[2]), &qv(&[1])), q(1));
        assert_eq!(hinge().dir_derivative(&qv(&[2]), &qv(&[-1])), q(0));
    }

    #[test]
    fn direction_maximal_examples() {
        let h = hinge();
        assert_eq!(h.direction_maximal_subgradients(&qv(&[2]), &qv(&[1])).active_gradients, vec![qv(&[1])]);
        assert_eq!(h.direction_maximal_subgradients(&qv(&[2]), &qv(&[-1])).active_gradients, vec![qv(&[0])]);
        let sym = PwlConvex::new(vec![piece(&[1, 0], 0), piece(&[0, 1], 0)]).unwrap();
        let tie = sym.direction_maximal_subgradients(&qv(&[1, 1]), &qv(&[1, 1]));
        assert_eq!(tie.active_gradients, vec![qv(&[0, 1]), qv(&[1, 0])]);
    }

    #[test]
    fn b_gamma_membership_examples() {
        let unit = AllocationSet::<Rational>::standard(StandardKind::Cube, 1).unwrap();
        let probes = vec![qv(&[0]), qv(&[1]), qv(&[2]), qv(&[3])];
        let r = hinge().is_in_b_gamma(&unit, &probes);
        assert!(r.member);
        assert_eq!(r.certificate, MembershipCertificate::AllGradientsInGamma);

        let steep = PwlConvex::linear(qv(&[2])).unwrap();
        let r = steep.is_in_b_gamma(&unit, &probes);
        assert!(!r.member);
        assert_eq!(r.failures.len(), probes.len());

        let shifted = PwlConvex::new(vec![piece(&[0], -1), piece(&[1], -3)]).unwrap();
        let r = shifted.is_in_b_gamma(&unit, &probes);
        assert!(!r.member);
        assert_eq!(r.value_at_origin, q(-1));
    }

    #[test]
    fn hull_intersection_counts_for_membership() {
        // gradients 0 and 2 at the kink of max(0, 2x - 2): 1 is in the hull and in Γ = {1}
        let g = AllocationSet::<Rational>::finite(1, vec![qv(&[1])]).unwrap();
        let f = PwlConvex::new(vec![piece(&[0], 0), piece(&[2], -2)]).unwrap();
        let at_kink = f.is_in_b_gamma(&g, &[qv(&[1])]);
        assert!(at_kink.failures.is_empty());
        let away = f.is_in_b_gamma(&g, &[qv(&[3])]);
        assert_eq!(away.failures, vec![qv(&[3])]);
    }

    #[test]
    fn differentiability_with_duplicates() {
        assert!(!hinge().is_differentiable(&qv(&[2])));
        assert!(hinge().is_differentiable(&qv(&[3])));
        let dup = PwlConvex::new(vec![piece(&[1], -2), piece(&[1], -2)]).unwrap();
        assert_eq!(dup.pieces().len(), 1);
        assert!(dup.is_differentiable(&qv(&[5])));
    }

    fn half_grid(max_halves: i64) -> Vec<Vec<Rational>> {
        let vals: Vec<Rational> = (0..=max_halves).map(|i| Rational::from_ratio(i, 2)).collect();
        let mut grid = Vec::new();
        for a in &vals {
            for b in &vals {
                grid.push(vec![a.clone(), b.clone()]);
            }
        }
        grid
    }

    #[test]
    fn supermodularity_examples() {
        let bundle = PwlConvex::new(vec![piece(&[0, 0], 0), piece(&[1, 1], -2)]).unwrap();
        assert!(bundle.check_supermodular(&half_grid(6)).supermodular);

        let maxf = PwlConvex::new(vec![piece(&[1, 0], 0), piece(&[0, 1], 0)]).unwrap();
        let r = maxf.check_supermodular(&[qv(&[1, 0]), qv(&[0, 1])]);
        assert!(!r.supermodular);
        assert_eq!(r.violations, vec![(qv(&[1, 0]), qv(&[0, 1]), q(1))]);

        let modular = PwlConvex::linear(qv(&[1, 0])).unwrap();
        assert!(modular.check_supermodular(&half_grid(4)).supermodular);
    }

    #[test]
    fn coordinatewise_max_examples() {
        let bundle = PwlConvex::new(vec![piece(&[0, 0], 0), piece(&[1, 1], -2)]).unwrap();
        assert_eq!(bundle.coordinatewise_max_subgradient(&qv(&[1, 1])).unwrap(), qv(&[1, 1]));
        let lin = PwlConvex::linear(qv(&[1, 0])).unwrap();
        assert_eq!(lin.coordinatewise_max_subgradient(&qv(&[4, 7])).unwrap(), qv(&[1, 0]));
        let maxf = PwlConvex::new(vec![piece(&[1, 0], 0), piece(&[0, 1], 0)]).unwrap();
        assert!(matches!(
            maxf.coordinatewise_max_subgradient(&qv(&[1, 1])),
            Err(Error::NoCoordinatewiseMax(_))
        ));
    }

    #[test]
    fn pruning_keeps_values_inside_the_box() {
        let f = PwlConvex::new(vec![piece(&[0], 0), piece(&[1], -2), piece(&[0], -5)]).unwrap();
        let pruned = f.prune_dominated(&qv(&[0]), &qv(&[10]));
        assert_eq!(pruned.pieces().len(), 2);
        for x in 0..=10 {
            assert_eq!(pruned.evaluate(&qv(&[x])), f.evaluate(&qv(&[x])));
        }
    }

    #[test]
    fn rejects_empty_and_ragged() {
        assert!(PwlConvex::<f64>::new(vec![]).is_err());
        assert!(PwlConvex::new(vec![
            AffinePiece::new(vec![1.0], 0.0),
            AffinePiece::new(vec![1.0, 2.0], 0.0)
        ])
        .is_err());
    }
}
