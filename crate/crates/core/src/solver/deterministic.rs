use std::sync::Arc;

use rayon::prelude::*;

use super::{finish, types_with_origin, ClassLabel, Diagnostics, MonotoneMode, SolveResult};
use crate::allocation::{AllocationKind, AllocationSet};
use crate::error::{Error, Result};
use crate::mechanism::MenuItem;
use crate::numeric::{cmp_scalar, Scalar};
use crate::valuation::DiscreteValuation;
use crate::vecops::{dot, leq};

pub const DEFAULT_CAP: u128 = 10_000_000;

/// Optimal revenue when allocations come from a finite Γ.
///
/// Every assignment of allocations to types is tried. For a fixed
/// assignment the constraints on payments are differences
/// `s_i - s_j <= (a_i - a_j)·x_i` together with `0 <= s_i <= a_i·x_i`, and
/// the pointwise largest feasible payments are shortest-path distances from
/// a reference node fixed at 0.
pub fn solve_deterministic<S: Scalar>(
    gamma: &Arc<AllocationSet<S>>,
    dist: &DiscreteValuation<S>,
    cap: u128,
) -> Result<SolveResult<S>> {
    enumerate(gamma, dist, cap, None)
}

struct Best<S> {
    index: u128,
    revenue: S,
    payments: Vec<S>,
}

pub(crate) fn enumerate<S: Scalar>(
    gamma: &Arc<AllocationSet<S>>,
    dist: &DiscreteValuation<S>,
    cap: u128,
    monotone: Option<MonotoneMode>,
) -> Result<SolveResult<S>> {
    if gamma.kind() != AllocationKind::Finite {
        return Err(Error::Unsupported("a finite allocation set".into()));
    }
    let k = gamma.dim();
    if dist.dim() != k {
        return Err(Error::DimensionMismatch { expected: k, got: dist.dim() });
    }
    let (points, weights) = types_with_origin(dist);
    let n = points.len();
    let allocs = gamma.vertices();
    let m = allocs.len() as u128;

    // The zero type takes the least allocation when there is one: a smaller
    // allocation there only relaxes everyone else's constraints.
    let origin = points.iter().position(|x| x.iter().all(|c| c.is_zero()));
    let fixed_origin = origin.zip(gamma.least_element());
    let fixed_index = fixed_origin
        .as_ref()
        .map(|(o, g)| (*o, allocs.iter().position(|a| a == g).expect("least element is listed")));
    let free: Vec<usize> = (0..n).filter(|&i| Some(i) != fixed_index.map(|f| f.0)).collect();

    let total = free
        .iter()
        .try_fold(1u128, |acc, _| acc.checked_mul(m))
        .unwrap_or(u128::MAX);
    if total > cap {
        return Err(Error::CapExceeded { needed: total, cap });
    }

    // value[i][a] = allocs[a] · x_i
    let value: Vec<Vec<S>> = points
        .iter()
        .map(|x| allocs.iter().map(|a| dot(a, x)).collect())
        .collect();
    let comparable: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| i != j && leq(&points[i], &points[j]))
        .collect();

    let decode = |index: u128| -> Vec<usize> {
        let mut a = vec![0usize; n];
        let mut rest = index;
        for &i in free.iter().rev() {
            a[i] = (rest % m) as usize;
            rest /= m;
        }
        if let Some((o, g)) = fixed_index {
            a[o] = g;
        }
        a
    };

    let best = (0..total)
        .into_par_iter()
        .filter_map(|index| {
            let a = decode(index);
            if monotone == Some(MonotoneMode::Allocation)
                && comparable.iter().any(|&(i, j)| !leq(&allocs[a[i]], &allocs[a[j]]))
            {
                return None;
            }
            let payments = max_payments(&a, &value, &comparable, monotone == Some(MonotoneMode::Payment))?;
            let revenue = S::sum_all(
                payments
                    .iter()
                    .zip(&weights)
                    .filter(|(_, w)| !w.is_zero())
                    .map(|(s, w)| s.clone() * w.clone())
                    .collect(),
            );
            Some(Best { index, revenue, payments })
        })
        .reduce_with(|x, y| match cmp_scalar(&x.revenue, &y.revenue) {
            std::cmp::Ordering::Greater => x,
            std::cmp::Ordering::Less => y,
            std::cmp::Ordering::Equal => {
                if x.index <= y.index {
                    x
                } else {
                    y
                }
            }
        })
        .ok_or_else(|| Error::Unsupported("an allocation set admitting a feasible assignment".into()))?;

    let a = decode(best.index);
    let item = |i: usize| MenuItem::new(allocs[a[i]].clone(), best.payments[i].clone());
    let per_type = (0..dist.len()).map(item).collect();
    let extra = (dist.len()..n).map(item).collect();
    let diagnostics = Diagnostics {
        variables: n,
        constraints: n * n + comparable.len(),
        assignments: total,
        ..Diagnostics::default()
    };
    finish(gamma, dist, per_type, extra, best.revenue, ClassLabel::Drev, diagnostics)
}

/// Largest payments for a fixed assignment, or `None` when the difference
/// constraints are infeasible. Node `n` is the reference with payment 0.
fn max_payments<S: Scalar>(
    a: &[usize],
    value: &[Vec<S>],
    comparable: &[(usize, usize)],
    payment_monotone: bool,
) -> Option<Vec<S>> {
    let n = a.len();
    // edges (from, to, w): s_to <= s_from + w
    let mut edges: Vec<(usize, usize, S)> = Vec::with_capacity(n * (n + 1) + comparable.len());
    for i in 0..n {
        edges.push((n, i, value[i][a[i]].clone()));
        edges.push((i, n, S::zero()));
        for j in 0..n {
            if i != j {
                edges.push((j, i, value[i][a[i]].clone() - value[i][a[j]].clone()));
            }
        }
    }
    if payment_monotone {
        edges.extend(comparable.iter().map(|&(i, j)| (j, i, S::zero())));
    }
    let mut dist: Vec<Option<S>> = vec![None; n + 1];
    dist[n] = Some(S::zero());
    for round in 0..=n + 1 {
        let mut changed = false;
        for (u, v, w) in &edges {
            let Some(du) = dist[*u].clone() else { continue };
            let cand = du + w.clone();
            if dist[*v].as_ref().is_none_or(|dv| cand < dv.clone() - S::tol()) {
                dist[*v] = Some(cand);
                changed = true;
            }
        }
        if !changed {
            break;
        }
        if round == n + 1 {
            return None;
        }
    }
    let base = dist[n].clone()?;
    if base < -S::tol() {
        return None;
    }
    Some(
        dist[..n]
            .iter()
            .map(|d| {
                let v = d.clone().expect("all nodes reachable from the reference");
                if v.is_negative() && v > -S::tol() {
                    S::zero()
                } else {
                    v
                }
            })
            .collect(),
    )
}
