//! Probe grids for verification and limit extraction.

use crate::numeric::{cmp_scalar, from_usize, Scalar};
use crate::vecops::{join, lex_cmp, meet, zeros};

/// Cartesian product of per-axis value lists.
pub fn product<S: Scalar>(axes: &[Vec<S>]) -> Vec<Vec<S>> {
    let mut out: Vec<Vec<S>> = vec![Vec::new()];
    for axis in axes {
        out = out
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push(v.clone());
                    q
                })
            })
            .collect();
    }
    out
}

/// `steps + 1` equally spaced values from `lo` to `hi`.
pub fn linspace<S: Scalar>(lo: &S, hi: &S, steps: usize) -> Vec<S> {
    if steps == 0 {
        return vec![lo.clone()];
    }
    let width = hi.clone() - lo.clone();
    (0..=steps)
        .map(|i| lo.clone() + width.clone() * from_usize::<S>(i) / from_usize::<S>(steps))
        .collect()
}

/// The box `[0, hi]^k` with `points_per_axis` values per axis.
pub fn box_grid<S: Scalar>(k: usize, hi: &S, points_per_axis: usize) -> Vec<Vec<S>> {
    let axis = linspace(&S::zero(), hi, points_per_axis.saturating_sub(1));
    product(&vec![axis; k])
}

/// Default box for limit extraction: `[0, 2·max coordinate]^k`, with 9
/// points per axis for `k <= 2` and 5 for `k = 3`. `None` above that.
pub fn default_box<S: Scalar>(support: &[Vec<S>]) -> Option<Vec<Vec<S>>> {
    let k = support.first()?.len();
    let per_axis = match k {
        1 | 2 => 9,
        3 => 5,
        _ => return None,
    };
    let max = support
        .iter()
        .flatten()
        .cloned()
        .reduce(S::max_of)
        .unwrap_or_else(S::zero);
    let hi = if max.is_zero() { S::one() } else { max * S::from_i64(2) };
    Some(box_grid(k, &hi, per_axis))
}

/// Closure of a point set under componentwise meet and join.
pub fn meet_join_closure<S: Scalar>(points: &[Vec<S>]) -> Vec<Vec<S>> {
    let mut set: Vec<Vec<S>> = points.to_vec();
    canonical(&mut set);
    loop {
        let mut next = set.clone();
        for i in 0..set.len() {
            for j in i + 1..set.len() {
                next.push(join(&set[i], &set[j]));
                next.push(meet(&set[i], &set[j]));
            }
        }
        canonical(&mut next);
        if next.len() == set.len() {
            return set;
        }
        set = next;
    }
}

/// Verification grid: per axis the support coordinates, zero, and the
/// midpoints between consecutive values; then the full product. Contains
/// the meet/join closure of the support.
pub fn verification_grid<S: Scalar>(support: &[Vec<S>]) -> Vec<Vec<S>> {
    let Some(k) = support.first().map(|x| x.len()) else {
        return Vec::new();
    };
    let axes: Vec<Vec<S>> = (0..k)
        .map(|i| {
            let mut vals: Vec<S> = support.iter().map(|x| x[i].clone()).collect();
            vals.push(S::zero());
            vals.sort_by(cmp_scalar);
            vals.dedup();
            let mids: Vec<S> = vals
                .windows(2)
                .map(|w| (w[0].clone() + w[1].clone()) / S::from_i64(2))
                .collect();
            vals.extend(mids);
            vals.sort_by(cmp_scalar);
            vals
        })
        .collect();
    product(&axes)
}

/// Appends points and the origin, then sorts and deduplicates.
pub fn with_points<S: Scalar>(mut grid: Vec<Vec<S>>, extra: &[Vec<S>]) -> Vec<Vec<S>> {
    if let Some(k) = grid.first().or(extra.first()).map(|x| x.len()) {
        grid.push(zeros(k));
    }
    grid.extend(extra.iter().cloned());
    canonical(&mut grid);
    grid
}

pub fn canonical<S: Scalar>(points: &mut Vec<Vec<S>>) {
    points.sort_by(|a, b| lex_cmp(a, b));
    points.dedup();
}
