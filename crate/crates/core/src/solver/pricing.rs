//! Posted prices: single-good optimal price, separate and bundle sale.

use std::sync::Arc;

use super::{finish, ClassLabel, Diagnostics, SolveResult};
use crate::allocation::AllocationSet;
use crate::error::{Error, Result};
use crate::mechanism::{Mechanism, Menu, MenuItem};
use crate::numeric::Scalar;
use crate::valuation::DiscreteValuation;

/// Best posted price for one good: maximizes `p · P[X >= p]` over support
/// points, smallest price on ties.
pub fn myerson_price<S: Scalar>(dist: &DiscreteValuation<S>) -> Result<(S, S)> {
    if dist.dim() != 1 {
        return Err(Error::Unsupported("a one-dimensional distribution".into()));
    }
    let mut pairs: Vec<(S, S)> = dist
        .support()
        .iter()
        .map(|x| x[0].clone())
        .zip(dist.probs().iter().cloned())
        .collect();
    pairs.sort_by(|a, b| crate::numeric::cmp_scalar(&a.0, &b.0));
    // tail[i] = P[X >= pairs[i].0], summed from the top
    let mut tail = vec![S::zero(); pairs.len()];
    let mut acc = S::zero();
    for i in (0..pairs.len()).rev() {
        acc = acc + pairs[i].1.clone();
        tail[i] = acc.clone();
    }
    let mut best = (pairs[0].0.clone(), pairs[0].0.clone() * tail[0].clone());
    for (i, (p, _)) in pairs.iter().enumerate().skip(1) {
        let r = p.clone() * tail[i].clone();
        if r > best.1 {
            best = (p.clone(), r);
        }
    }
    Ok(best)
}

/// Sum over goods of the best single-good revenue.
pub fn srev<S: Scalar>(dist: &DiscreteValuation<S>) -> S {
    S::sum_all(
        (0..dist.dim())
            .map(|i| myerson_price(&dist.marginal(i)).expect("marginals are 1-D").1)
            .collect(),
    )
}

/// Best revenue from selling only the grand bundle.
pub fn brev<S: Scalar>(dist: &DiscreteValuation<S>) -> S {
    myerson_price(&dist.bundle_sum()).expect("bundle sum is 1-D").1
}

/// Every subset of goods at the sum of its item prices.
pub fn separate_price_menu<S: Scalar>(gamma: &Arc<AllocationSet<S>>, prices: &[S]) -> Result<Menu<S>> {
    let k = prices.len();
    if k != gamma.dim() {
        return Err(Error::DimensionMismatch { expected: gamma.dim(), got: k });
    }
    if k > 16 {
        return Err(Error::Unsupported("at most 16 goods for separate pricing".into()));
    }
    let items = (0..1usize << k)
        .map(|mask| {
            let alloc: Vec<S> = (0..k)
                .map(|i| if mask >> i & 1 == 1 { S::one() } else { S::zero() })
                .collect();
            let pay = S::sum_all((0..k).filter(|i| mask >> i & 1 == 1).map(|i| prices[i].clone()).collect());
            MenuItem::new(alloc, pay)
        })
        .collect();
    Menu::new(gamma.clone(), items).map_err(|_| needs_cube_vertices())
}

/// Nothing, or all goods at `price`.
pub fn bundle_price_menu<S: Scalar>(gamma: &Arc<AllocationSet<S>>, price: S) -> Result<Menu<S>> {
    Menu::with_null(gamma.clone(), vec![MenuItem::new(vec![S::one(); gamma.dim()], price)])
        .map_err(|_| needs_cube_vertices())
}

fn needs_cube_vertices() -> Error {
    Error::Unsupported("an allocation set containing the 0/1 allocations".into())
}

fn posted<S: Scalar>(
    gamma: &Arc<AllocationSet<S>>,
    dist: &DiscreteValuation<S>,
    menu: Menu<S>,
    revenue: S,
    label: ClassLabel,
) -> Result<SolveResult<S>> {
    let mechanism = Mechanism::new(menu.clone());
    let per_type: Vec<MenuItem<S>> = dist
        .support()
        .iter()
        .map(|x| {
            let c = mechanism.choose(x);
            MenuItem::new(c.allocation, c.payment)
        })
        .collect();
    let mut result = finish(
        gamma,
        dist,
        per_type,
        menu.items().to_vec(),
        revenue,
        label,
        Diagnostics::default(),
    )?;
    result.diagnostics.variables = dist.dim();
    Ok(result)
}

pub fn solve_srev<S: Scalar>(gamma: &Arc<AllocationSet<S>>, dist: &DiscreteValuation<S>) -> Result<SolveResult<S>> {
    let prices: Vec<S> = (0..dist.dim())
        .map(|i| myerson_price(&dist.marginal(i)).map(|p| p.0))
        .collect::<Result<_>>()?;
    let menu = separate_price_menu(gamma, &prices)?;
    posted(gamma, dist, menu, srev(dist), ClassLabel::Srev)
}

pub fn solve_brev<S: Scalar>(gamma: &Arc<AllocationSet<S>>, dist: &DiscreteValuation<S>) -> Result<SolveResult<S>> {
    let (price, revenue) = myerson_price(&dist.bundle_sum())?;
    let menu = bundle_price_menu(gamma, price)?;
    posted(gamma, dist, menu, revenue, ClassLabel::Brev)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::Rational;

    fn r(n: i64, d: i64) -> Rational {
        Rational::from_ratio(n, d)
    }

    fn line(vals: &[i64]) -> DiscreteValuation<Rational> {
        DiscreteValuation::uniform(vals.iter().map(|&v| vec![r(v, 1)]).collect()).unwrap()
    }

    #[test]
    fn single_good_prices() {
        assert_eq!(myerson_price(&line(&[1, 2])).unwrap(), (r(1, 1), r(1, 1)));
        assert_eq!(myerson_price(&line(&[1, 2, 3])).unwrap(), (r(2, 1), r(4, 3)));
        assert_eq!(myerson_price(&line(&[5])).unwrap(), (r(5, 1), r(5, 1)));
    }

    #[test]
    fn separate_and_bundle_on_iid_pair() {
        let x = DiscreteValuation::iid(&line(&[1, 2]), 2).unwrap();
        assert_eq!(srev(&x), r(2, 1));
        assert_eq!(brev(&x), r(9, 4));
    }
}
