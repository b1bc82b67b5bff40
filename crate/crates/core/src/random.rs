//! Seeded generators for randomized checks. All values are small-denominator
//! rationals, so the same draw is exact in either numeric mode.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::allocation::AllocationSet;
use crate::convergence::{AffineItem, MechanismSequence};
use crate::error::Result;
use crate::mechanism::{Menu, MenuItem};
use crate::numeric::Scalar;
use crate::valuation::DiscreteValuation;
use crate::vecops::zeros;

/// A multiple of `1/den` in `[0, max_units/den]`.
pub fn grid_value<S: Scalar, R: Rng>(rng: &mut R, max_units: i64, den: i64) -> S {
    S::from_ratio(rng.gen_range(0..=max_units), den)
}

pub fn grid_point<S: Scalar, R: Rng>(rng: &mut R, k: usize, max_units: i64, den: i64) -> Vec<S> {
    (0..k).map(|_| grid_value(rng, max_units, den)).collect()
}

/// Convex hull of the origin and a few random points of `[0,1]^k`, given by
/// vertices only.
pub fn polytope<S: Scalar, R: Rng>(rng: &mut R, k: usize) -> Result<AllocationSet<S>> {
    let count = rng.gen_range(k + 1..=k + 4);
    let mut pts = vec![zeros(k)];
    pts.extend((0..count).map(|_| grid_point(rng, k, 4, 4)));
    AllocationSet::polytope_from_vertices(k, pts)
}

/// A random point of Γ: a vertex, or a convex combination of two or three.
pub fn point_in<S: Scalar, R: Rng>(rng: &mut R, gamma: &AllocationSet<S>) -> Vec<S> {
    let verts = gamma.vertices();
    let pick = |rng: &mut R| verts.choose(rng).expect("nonempty").clone();
    if !gamma.is_convex() || rng.gen_bool(0.3) {
        return pick(rng);
    }
    let parts = rng.gen_range(2..=3);
    let weights: Vec<i64> = (0..parts).map(|_| rng.gen_range(1..=4)).collect();
    let total: i64 = weights.iter().sum();
    let mut out: Vec<S> = zeros(gamma.dim());
    for w in weights {
        let v = pick(rng);
        let f = S::from_ratio(w, total);
        for (o, c) in out.iter_mut().zip(&v) {
            *o = o.clone() + f.clone() * c.clone();
        }
    }
    out
}

/// Up to `size` random offers with payments in `[0, 3]`.
pub fn menu<S: Scalar, R: Rng>(rng: &mut R, gamma: &Arc<AllocationSet<S>>, size: usize) -> Menu<S> {
    let items = (0..size.max(1))
        .map(|_| MenuItem::new(point_in(rng, gamma), grid_value(rng, 12, 4)))
        .collect();
    Menu::new(gamma.clone(), items).expect("allocations drawn from the set")
}

/// `n` distinct support points in `[0, max]^k` (quarter steps) with random
/// positive weights.
pub fn valuation<S: Scalar, R: Rng>(rng: &mut R, k: usize, n: usize, max_units: i64) -> DiscreteValuation<S> {
    let mut support: Vec<Vec<S>> = Vec::new();
    while support.len() < n {
        let x = grid_point(rng, k, max_units, 4);
        if !support.contains(&x) {
            support.push(x);
        }
    }
    let weights: Vec<i64> = (0..n).map(|_| rng.gen_range(1..=6)).collect();
    let total: i64 = weights.iter().sum();
    let probs = weights.into_iter().map(|w| S::from_ratio(w, total)).collect();
    DiscreteValuation::new(support, probs).expect("valid by construction")
}

/// The null offer plus items whose allocations move along segments in Γ and
/// whose payments are `t + c/n` with `t >= 1`, `|c| <= 1`. Γ must contain 0.
pub fn affine_sequence<S: Scalar, R: Rng>(
    rng: &mut R,
    gamma: &Arc<AllocationSet<S>>,
    size: usize,
) -> Result<MechanismSequence<S>> {
    let k = gamma.dim();
    let mut items = vec![AffineItem {
        limit: MenuItem::new(zeros(k), S::zero()),
        drift: MenuItem::new(zeros(k), S::zero()),
    }];
    for _ in 0..size {
        let g = point_in(rng, gamma);
        let h = if rng.gen_bool(0.5) { g.clone() } else { point_in(rng, gamma) };
        let t = S::from_ratio(rng.gen_range(4..=12), 4);
        let c = S::from_ratio(rng.gen_range(-4..=4), 4);
        items.push(AffineItem {
            limit: MenuItem::new(g, t),
            drift: MenuItem::new(h, c),
        });
    }
    MechanismSequence::affine(gamma.clone(), items)
}

/// Menus on `[0,1]^k` whose allocations form a chain `0 <= g_1 <= ... <= g_m`
/// with nondecreasing payments `t_i + c_i/n`: the buyer's pick moves up the
/// chain as the valuation grows, so every member is payment monotone.
pub fn chain_sequence<S: Scalar, R: Rng>(
    rng: &mut R,
    gamma: &Arc<AllocationSet<S>>,
    size: usize,
) -> Result<MechanismSequence<S>> {
    let k = gamma.dim();
    let mut alloc_units = vec![0i64; k];
    let (mut t_units, mut c_units) = (0i64, 0i64);
    let mut items = vec![AffineItem {
        limit: MenuItem::new(zeros(k), S::zero()),
        drift: MenuItem::new(zeros(k), S::zero()),
    }];
    for _ in 0..size {
        for a in alloc_units.iter_mut() {
            *a = (*a + rng.gen_range(0..=2)).min(4);
        }
        t_units += rng.gen_range(1..=6);
        c_units += rng.gen_range(0..=2);
        let g: Vec<S> = alloc_units.iter().map(|&a| S::from_ratio(a, 4)).collect();
        items.push(AffineItem {
            limit: MenuItem::new(g.clone(), S::from_ratio(t_units, 4)),
            drift: MenuItem::new(g, S::from_ratio(c_units, 4)),
        });
    }
    MechanismSequence::affine(gamma.clone(), items)
}
