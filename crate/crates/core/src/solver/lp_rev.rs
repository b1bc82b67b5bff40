use std::sync::Arc;

use super::{finish, types_with_origin, ClassLabel, Diagnostics, MonotoneMode, SolveResult};
use crate::allocation::{AllocationKind, AllocationSet};
use crate::error::{Error, Result};
use crate::lp::{LinearProgram, Relation};
use crate::mechanism::MenuItem;
use crate::numeric::Scalar;
use crate::valuation::DiscreteValuation;
use crate::vecops::leq;

/// Optimal revenue over all mechanisms with allocations in a polytope Γ.
///
/// One allocation vector and one payment per type, with pairwise IC, IR and
/// nonnegative payments. Among optimal solutions the payment vector is
/// lexicographically maximal, so the seller-favorable choice at each type
/// reproduces its LP payment.
pub fn solve_rev<S: Scalar>(gamma: &Arc<AllocationSet<S>>, dist: &DiscreteValuation<S>) -> Result<SolveResult<S>> {
    solve_lp(gamma, dist, None)
}

pub(crate) fn solve_lp<S: Scalar>(
    gamma: &Arc<AllocationSet<S>>,
    dist: &DiscreteValuation<S>,
    monotone: Option<MonotoneMode>,
) -> Result<SolveResult<S>> {
    if gamma.kind() != AllocationKind::Polytope {
        return Err(Error::Unsupported(
            "a polytope allocation set (use the convex hull, or the deterministic solver for finite sets)".into(),
        ));
    }
    let k = gamma.dim();
    if dist.dim() != k {
        return Err(Error::DimensionMismatch { expected: k, got: dist.dim() });
    }
    let (points, weights) = types_with_origin(dist);
    let n = points.len();

    // per type: k allocation variables then the payment; lambdas after all types
    let stride = k + 1;
    let q = |i: usize, c: usize| i * stride + c;
    let s = |i: usize| i * stride + k;
    let hull = match gamma.halfspaces() {
        Some(_) => 0,
        None => gamma.vertices().len(),
    };
    let lambda = |i: usize, j: usize| n * stride + i * hull + j;
    let mut lp = LinearProgram::<S>::new(n * stride + n * hull);

    for i in 0..n {
        match gamma.halfspaces() {
            Some(hs) => {
                for h in hs {
                    // nonnegativity rows duplicate the variable bounds
                    if h.offset.is_zero() && h.normal.iter().all(|c| !c.is_positive()) {
                        continue;
                    }
                    let row = (0..k)
                        .filter(|&c| !h.normal[c].is_zero())
                        .map(|c| (q(i, c), h.normal[c].clone()))
                        .collect();
                    lp.add_constraint(row, Relation::Le, h.offset.clone());
                }
            }
            None => {
                lp.add_constraint((0..hull).map(|j| (lambda(i, j), S::one())).collect(), Relation::Eq, S::one());
                for c in 0..k {
                    let mut row = vec![(q(i, c), S::one())];
                    row.extend(
                        gamma
                            .vertices()
                            .iter()
                            .enumerate()
                            .filter(|(_, v)| !v[c].is_zero())
                            .map(|(j, v)| (lambda(i, j), -v[c].clone())),
                    );
                    lp.add_constraint(row, Relation::Eq, S::zero());
                }
            }
        }
    }

    let utility_row = |i: usize, j: usize, sign: S| -> Vec<(usize, S)> {
        // sign * (q_j · x_i - s_j)
        let x = &points[i];
        let mut row: Vec<(usize, S)> = (0..k)
            .filter(|&c| !x[c].is_zero())
            .map(|c| (q(j, c), sign.clone() * x[c].clone()))
            .collect();
        row.push((s(j), -sign));
        row
    };
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let mut row = utility_row(i, i, S::one());
            row.extend(utility_row(i, j, -S::one()));
            lp.add_constraint(row, Relation::Ge, S::zero());
        }
        lp.add_constraint(utility_row(i, i, S::one()), Relation::Ge, S::zero());
    }

    if let Some(mode) = monotone {
        for i in 0..n {
            for j in 0..n {
                if i == j || !leq(&points[i], &points[j]) {
                    continue;
                }
                match mode {
                    MonotoneMode::Payment => {
                        lp.add_constraint(vec![(s(i), S::one()), (s(j), -S::one())], Relation::Le, S::zero());
                    }
                    MonotoneMode::Allocation => {
                        for c in 0..k {
                            lp.add_constraint(
                                vec![(q(i, c), S::one()), (q(j, c), -S::one())],
                                Relation::Le,
                                S::zero(),
                            );
                        }
                    }
                }
            }
        }
    }

    let mut objective = vec![S::zero(); lp.num_vars()];
    for i in 0..n {
        objective[s(i)] = weights[i].clone();
    }
    lp.maximize(objective);
    let secondary: Vec<Vec<S>> = (0..n)
        .map(|i| {
            let mut o = vec![S::zero(); lp.num_vars()];
            o[s(i)] = S::one();
            o
        })
        .collect();
    let sol = lp.solve_lexicographic(&secondary)?;

    let item = |i: usize| {
        let alloc: Vec<S> = (0..k).map(|c| sol.values[q(i, c)].clone()).collect();
        MenuItem::new(alloc, sol.values[s(i)].clone())
    };
    let per_type: Vec<MenuItem<S>> = (0..dist.len()).map(item).collect();
    let extra: Vec<MenuItem<S>> = (dist.len()..n).map(item).collect();
    let optimum = S::sum_all(
        (0..n)
            .map(|i| weights[i].clone() * sol.values[s(i)].clone())
            .collect(),
    );
    let diagnostics = Diagnostics {
        iterations: sol.iterations,
        variables: lp.num_vars(),
        constraints: lp.num_constraints(),
        ..Diagnostics::default()
    };
    finish(gamma, dist, per_type, extra, optimum, ClassLabel::Rev, diagnostics)
}
