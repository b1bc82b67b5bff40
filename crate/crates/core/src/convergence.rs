//! Sequences of mechanisms and their limits.
//!
//! A [`MechanismSequence`] is evaluated on a probe grid for `n = 1..=n_max`.
//! When the payoff values settle, [`build_limit_mechanism`] fits supporting
//! hyperplanes with gradients in Γ at every grid point and turns them into a
//! menu, and [`check_usc`] compares the revenue of that limit with the tail
//! of the revenue sequence.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::allocation::{AllocationKind, AllocationSet};
use crate::error::{Error, Result};
use crate::grid;
use crate::lp::{LinearProgram, Relation};
use crate::mechanism::{Mechanism, Menu, MenuItem, TieRule, VerificationReport};
use crate::numeric::{from_usize, Scalar};
use crate::solver::MonotoneMode;
use crate::valuation::DiscreteValuation;
use crate::vecops::{dot, lex_cmp, sub, to_f64_vec};

pub const DEFAULT_WINDOW: usize = 5;

pub type MenuGenerator<S> = Arc<dyn Fn(usize) -> Menu<S> + Send + Sync>;

/// `p_n = constant + inv_n / n + linear_n · n + alternating · (-1)^n`,
/// clamped at zero.
#[derive(Clone, Debug, PartialEq)]
pub struct PriceSchedule<S> {
    pub constant: S,
    pub inv_n: S,
    pub linear_n: S,
    pub alternating: S,
}

impl<S: Scalar> PriceSchedule<S> {
    pub fn constant(c: S) -> Self {
        Self {
            constant: c,
            inv_n: S::zero(),
            linear_n: S::zero(),
            alternating: S::zero(),
        }
    }

    /// `c + a / n`.
    pub fn harmonic(c: S, a: S) -> Self {
        Self {
            inv_n: a,
            ..Self::constant(c)
        }
    }

    /// `p_n = n`.
    pub fn escaping() -> Self {
        Self {
            linear_n: S::one(),
            ..Self::constant(S::zero())
        }
    }

    pub fn at(&self, n: usize) -> S {
        let nn = from_usize::<S>(n);
        let sign = if n.is_multiple_of(2) { S::one() } else { -S::one() };
        let p = self.constant.clone()
            + self.inv_n.clone() / nn.clone()
            + self.linear_n.clone() * nn
            + self.alternating.clone() * sign;
        S::max_of(p, S::zero())
    }
}

/// One offer of an affine family: allocation `(1 - 1/n) g + h / n`,
/// payment `t + c / n`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineItem<S> {
    pub limit: MenuItem<S>,
    pub drift: MenuItem<S>,
}

#[derive(Clone)]
pub struct MechanismSequence<S> {
    gamma: Arc<AllocationSet<S>>,
    generator: MenuGenerator<S>,
    label: String,
}

impl<S: Scalar> fmt::Debug for MechanismSequence<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MechanismSequence").field("label", &self.label).finish()
    }
}

impl<S: Scalar> MechanismSequence<S> {
    /// `generator` must be a pure function of `n >= 1`.
    pub fn new(gamma: Arc<AllocationSet<S>>, label: impl Into<String>, generator: MenuGenerator<S>) -> Self {
        Self {
            gamma,
            generator,
            label: label.into(),
        }
    }

    pub fn gamma(&self) -> &Arc<AllocationSet<S>> {
        &self.gamma
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn menu(&self, n: usize) -> Menu<S> {
        (self.generator)(n)
    }

    pub fn mechanism(&self, n: usize) -> Mechanism<S> {
        Mechanism::new(self.menu(n))
    }

    /// Each good sold separately at `p_n`.
    pub fn fixed_price(gamma: Arc<AllocationSet<S>>, schedule: PriceSchedule<S>) -> Result<Self> {
        let k = gamma.dim();
        crate::solver::separate_price_menu(&gamma, &vec![schedule.at(1); k])?;
        let g = gamma.clone();
        Ok(Self::new(
            gamma,
            "fixed_price",
            Arc::new(move |n| {
                crate::solver::separate_price_menu(&g, &vec![schedule.at(n); k]).expect("checked at n = 1")
            }),
        ))
    }

    /// The grand bundle at `p_n`.
    pub fn bundle_price(gamma: Arc<AllocationSet<S>>, schedule: PriceSchedule<S>) -> Result<Self> {
        crate::solver::bundle_price_menu(&gamma, schedule.at(1))?;
        let g = gamma.clone();
        Ok(Self::new(
            gamma,
            "bundle_price",
            Arc::new(move |n| crate::solver::bundle_price_menu(&g, schedule.at(n)).expect("checked at n = 1")),
        ))
    }

    /// Explicit menus for `n = 1..=len`; the last one repeats afterwards.
    pub fn menu_list(menus: Vec<Menu<S>>) -> Result<Self> {
        let first = menus
            .first()
            .ok_or_else(|| Error::InvalidMenu("menu list is empty".into()))?;
        let gamma = first.gamma().clone();
        let menus = Arc::new(menus);
        Ok(Self::new(
            gamma,
            "menu_list",
            Arc::new(move |n| menus[(n.max(1) - 1).min(menus.len() - 1)].clone()),
        ))
    }

    /// Payments of `base` multiplied by `factor_n`.
    pub fn scaled_menu(base: Menu<S>, factor: PriceSchedule<S>) -> Self {
        let gamma = base.gamma().clone();
        Self::new(
            gamma.clone(),
            "scaled_menu",
            Arc::new(move |n| {
                let f = factor.at(n);
                let items = base
                    .items()
                    .iter()
                    .map(|it| MenuItem::new(it.allocation.clone(), it.payment.clone() * f.clone()))
                    .collect();
                Menu::from_trusted(gamma.clone(), items)
            }),
        )
    }

    /// Offers moving along segments inside Γ with payments `t + c/n`.
    pub fn affine(gamma: Arc<AllocationSet<S>>, items: Vec<AffineItem<S>>) -> Result<Self> {
        // segment endpoints in a convex Γ keep every member inside it
        Menu::new(gamma.clone(), items.iter().map(|it| it.limit.clone()).collect())?;
        Menu::new(gamma.clone(), items.iter().map(|it| it.drift.clone()).collect())?;
        let build = {
            let gamma = gamma.clone();
            move |n: usize| -> Result<Menu<S>> {
                let nn = from_usize::<S>(n);
                let w = S::one() / nn;
                let v = S::one() - w.clone();
                let offers = items
                    .iter()
                    .map(|it| {
                        let alloc = it
                            .limit
                            .allocation
                            .iter()
                            .zip(&it.drift.allocation)
                            .map(|(g, h)| v.clone() * g.clone() + w.clone() * h.clone())
                            .collect();
                        MenuItem::new(alloc, it.limit.payment.clone() + w.clone() * it.drift.payment.clone())
                    })
                    .collect();
                if gamma.is_convex() {
                    Ok(Menu::from_trusted(gamma.clone(), offers))
                } else {
                    Menu::new(gamma.clone(), offers)
                }
            }
        };
        build(1)?;
        build(2)?;
        Ok(Self::new(
            gamma,
            "affine",
            Arc::new(move |n| build(n).expect("segments stay inside a convex set")),
        ))
    }
}

/// Value of a scalar sequence's tail: `Some((limit, extrapolated))` when the
/// last `window` terms are constant within `tol`, or lie on `L + c/n`
/// within `tol` (then `L` is returned). `values[i]` is the term for `n = i + 1`.
pub fn tail_limit<S: Scalar>(values: &[S], window: usize, tol: &S) -> Option<(S, bool)> {
    let end = values.len();
    let w = window.min(end);
    if w < 2 {
        return None;
    }
    let tail = &values[end - w..];
    let hi = tail.iter().cloned().reduce(S::max_of)?;
    let lo = tail.iter().cloned().reduce(S::min_of)?;
    if hi - lo <= *tol {
        return Some((tail[w - 1].clone(), false));
    }
    if w < 3 {
        return None;
    }
    let n1 = from_usize::<S>(end - 1);
    let n2 = from_usize::<S>(end);
    let (v1, v2) = (tail[w - 2].clone(), tail[w - 1].clone());
    let limit = (n2.clone() * v2 - n1.clone() * v1.clone()) / (n2 - n1.clone());
    let c = (v1 - limit.clone()) * n1;
    let scale = S::max_of(S::one(), limit.abs());
    let fits = tail.iter().enumerate().all(|(i, v)| {
        let n = from_usize::<S>(end - w + i + 1);
        (limit.clone() + c.clone() / n - v.clone()).abs() <= tol.clone() * scale.clone()
    });
    fits.then_some((limit, true))
}

/// Limsup estimate: the tail limit when one exists, else the window max.
pub fn limsup_estimate<S: Scalar>(values: &[S], window: usize, tol: &S) -> S {
    match tail_limit(values, window, tol) {
        Some((l, _)) => l,
        None => values[values.len().saturating_sub(window)..]
            .iter()
            .cloned()
            .reduce(S::max_of)
            .unwrap_or_else(S::zero),
    }
}

#[derive(Clone, Debug)]
pub struct LimitEstimate<S> {
    pub values: Vec<S>,
    pub converged: bool,
    pub extrapolated: bool,
    /// Largest spread over the final window across grid points.
    pub sup_gap: S,
    pub first_converged_n: Option<usize>,
    pub window: usize,
}

/// Payoffs `b_n` on the grid for `n = 1..=n_max` and their pointwise limit.
pub fn limit_payoff<S: Scalar>(
    seq: &MechanismSequence<S>,
    grid: &[Vec<S>],
    n_max: usize,
    tol: &S,
    window: usize,
) -> Result<LimitEstimate<S>> {
    if grid.is_empty() {
        return Err(Error::Schema("probe grid is empty".into()));
    }
    if n_max < 2 {
        return Err(Error::Schema("n_max must be at least 2".into()));
    }
    // by_point[g][n-1]
    let by_n: Vec<Vec<S>> = (1..=n_max)
        .into_par_iter()
        .map(|n| {
            let menu = seq.menu(n);
            grid.iter().map(|x| menu.payoff(x)).collect()
        })
        .collect();
    let by_point: Vec<Vec<S>> = (0..grid.len())
        .map(|g| by_n.iter().map(|row| row[g].clone()).collect())
        .collect();

    let settle = |end: usize| -> Option<(Vec<S>, bool)> {
        let mut extrapolated = false;
        let mut out = Vec::with_capacity(grid.len());
        for series in &by_point {
            let (l, e) = tail_limit(&series[..end], window, tol)?;
            extrapolated |= e;
            out.push(l);
        }
        Some((out, extrapolated))
    };
    let first_converged_n = (2..=n_max).find(|&end| settle(end).is_some());
    let w = window.min(n_max);
    let sup_gap = by_point
        .iter()
        .map(|s| {
            let tail = &s[n_max - w..];
            let hi = tail.iter().cloned().reduce(S::max_of).expect("nonempty");
            let lo = tail.iter().cloned().reduce(S::min_of).expect("nonempty");
            hi - lo
        })
        .reduce(S::max_of)
        .expect("nonempty grid");
    let (values, converged, extrapolated) = match settle(n_max) {
        Some((v, e)) => (v, true, e),
        None => (by_n[n_max - 1].clone(), false, false),
    };
    Ok(LimitEstimate {
        values,
        converged,
        extrapolated,
        sup_gap,
        first_converged_n,
        window,
    })
}

/// A menu whose payoff matches `values` on the grid.
///
/// At each grid point a gradient `g ∈ Γ` with `v(y) >= v(x) + g·(y - x)` for
/// all grid `y` is chosen. At anchor points the gradient maximizes `g·x`,
/// so the item charges the largest consistent payment there; elsewhere it
/// minimizes `g·x`, which keeps boundary points from extrapolating steeper
/// slopes than the data supports. Remaining ties go to the lexicographically
/// largest gradient.
pub fn build_limit_mechanism<S: Scalar>(
    values: &[S],
    grid: &[Vec<S>],
    gamma: &Arc<AllocationSet<S>>,
    anchors: &[Vec<S>],
) -> Result<Mechanism<S>> {
    if values.len() != grid.len() || grid.is_empty() {
        return Err(Error::Schema("limit values and grid differ in length".into()));
    }
    let items: Vec<MenuItem<S>> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let x = &grid[i];
            let maximize = anchors.contains(x);
            let g = supporting_gradient(values, grid, i, gamma, maximize)
                .ok_or_else(|| Error::NoFeasibleGradient(to_f64_vec(x)))?;
            let payment = dot(&g, x) - values[i].clone();
            Ok(MenuItem::new(g, payment))
        })
        .collect::<Result<_>>()?;
    Ok(Mechanism::new(Menu::new(gamma.clone(), items)?))
}

fn supporting_gradient<S: Scalar>(
    values: &[S],
    grid: &[Vec<S>],
    i: usize,
    gamma: &AllocationSet<S>,
    maximize: bool,
) -> Option<Vec<S>> {
    let x = &grid[i];
    let vx = &values[i];
    // Absorbs rounding in float limits. Scaled by the smaller endpoint so
    // this item never enters another point's active window.
    let relax = |vy: &S| {
        let scale = S::min_of(S::max_of(S::one(), vx.abs()), S::max_of(S::one(), vy.abs()));
        S::tol() * scale / S::from_i64(4)
    };
    let mut rows: Vec<(Vec<S>, S)> = grid
        .iter()
        .zip(values)
        .enumerate()
        .filter(|(j, _)| *j != i)
        .map(|(_, (y, vy))| (sub(y, x), vy.clone() - vx.clone() + relax(vy)))
        .collect();
    let sign = if maximize { S::one() } else { -S::one() };
    // the relaxation is already in r, so the test is strict
    let fits = |g: &[S], (d, r): &(Vec<S>, S)| dot(g, d) <= *r;

    if gamma.kind() == AllocationKind::Finite {
        return gamma
            .vertices()
            .iter()
            .filter(|g| rows.iter().all(|row| fits(g, row)))
            .max_by(|a, b| {
                crate::numeric::cmp_scalar(&(sign.clone() * dot(a, x)), &(sign.clone() * dot(b, x)))
                    .then_with(|| lex_cmp(a, b))
            })
            .cloned();
    }

    // Row generation: nearby points usually pin the gradient, so solve with
    // those first and add whatever rows the answer violates. An optimum of
    // the restricted program that satisfies every row is optimal overall.
    rows.sort_by(|a, b| crate::vecops::norm_f64(&a.0).total_cmp(&crate::vecops::norm_f64(&b.0)));
    let mut active: Vec<usize> = (0..rows.len().min(2 * 3usize.pow(gamma.dim() as u32))).collect();
    let mut used = vec![false; rows.len()];
    active.iter().for_each(|&j| used[j] = true);
    loop {
        let picked: Vec<&(Vec<S>, S)> = active.iter().map(|&j| &rows[j]).collect();
        let g = gradient_lp(&picked, x, gamma, &sign)?;
        let violated: Vec<usize> = (0..rows.len()).filter(|&j| !used[j] && !fits(&g, &rows[j])).collect();
        if violated.is_empty() {
            return Some(g);
        }
        for j in violated {
            used[j] = true;
            active.push(j);
        }
    }
}

/// `sign · g·x` maximized over `g ∈ Γ` subject to `g·d <= r` for each row,
/// then the lexicographically largest `g`.
fn gradient_lp<S: Scalar>(rows: &[&(Vec<S>, S)], x: &[S], gamma: &AllocationSet<S>, sign: &S) -> Option<Vec<S>> {
    let k = gamma.dim();
    let hull = if gamma.halfspaces().is_some() { 0 } else { gamma.vertices().len() };
    let mut lp = LinearProgram::<S>::new(k + hull);
    for (d, r) in rows {
        let row: Vec<(usize, S)> = (0..k).filter(|&c| !d[c].is_zero()).map(|c| (c, d[c].clone())).collect();
        if row.is_empty() {
            if r.is_negative() {
                return None;
            }
            continue;
        }
        lp.add_constraint(row, Relation::Le, r.clone());
    }
    match gamma.halfspaces() {
        Some(hs) => {
            for h in hs {
                if h.offset.is_zero() && h.normal.iter().all(|c| !c.is_positive()) {
                    continue;
                }
                let row = (0..k).filter(|&c| !h.normal[c].is_zero()).map(|c| (c, h.normal[c].clone())).collect();
                lp.add_constraint(row, Relation::Le, h.offset.clone());
            }
        }
        None => {
            lp.add_constraint((k..k + hull).map(|j| (j, S::one())).collect(), Relation::Eq, S::one());
            for c in 0..k {
                let mut row = vec![(c, S::one())];
                row.extend(
                    gamma
                        .vertices()
                        .iter()
                        .enumerate()
                        .filter(|(_, v)| !v[c].is_zero())
                        .map(|(j, v)| (k + j, -v[c].clone())),
                );
                lp.add_constraint(row, Relation::Eq, S::zero());
            }
        }
    }
    let mut objective = vec![S::zero(); k + hull];
    for c in 0..k {
        objective[c] = sign.clone() * x[c].clone();
    }
    lp.maximize(objective);
    let secondary: Vec<Vec<S>> = (0..k)
        .map(|c| {
            let mut o = vec![S::zero(); k + hull];
            o[c] = S::one();
            o
        })
        .collect();
    let sol = lp.solve_lexicographic(&secondary).ok()?;
    Some(sol.values[..k].to_vec())
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointwiseUsc<S> {
    pub point: Vec<S>,
    pub limsup_payment: S,
    pub limit_payment: S,
    pub holds: bool,
}

#[derive(Clone, Debug)]
pub struct UscCheck<S> {
    pub revenue_sequence: Vec<S>,
    pub limsup: S,
    pub limit_revenue: S,
    pub usc_slack: S,
    pub usc_holds: bool,
    pub pointwise: Vec<PointwiseUsc<S>>,
}

/// Revenue of the limit against the limsup of the sequence's revenues, and
/// the same comparison for payments at every support point.
pub fn check_usc<S: Scalar>(
    seq: &MechanismSequence<S>,
    limit: &Mechanism<S>,
    dist: &DiscreteValuation<S>,
    n_max: usize,
    tol: &S,
    window: usize,
) -> UscCheck<S> {
    let rows: Vec<(S, Vec<S>)> = (1..=n_max)
        .into_par_iter()
        .map(|n| {
            let m = seq.mechanism(n);
            let pays: Vec<S> = dist.support().iter().map(|x| m.choose(x).payment).collect();
            let rev = S::sum_all(
                pays.iter()
                    .zip(dist.probs())
                    .map(|(s, p)| s.clone() * p.clone())
                    .collect(),
            );
            (rev, pays)
        })
        .collect();
    let revenue_sequence: Vec<S> = rows.iter().map(|r| r.0.clone()).collect();
    let limsup = limsup_estimate(&revenue_sequence, window, tol);
    let limit_revenue = limit.revenue(dist);
    let usc_slack = limit_revenue.clone() - limsup.clone();
    let limsup_scale = S::sum_all(dist.expectation().to_vec()) + limsup.abs();
    let pointwise = dist
        .support()
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let series: Vec<S> = rows.iter().map(|r| r.1[i].clone()).collect();
            let limsup_payment = limsup_estimate(&series, window, tol);
            let limit_payment = limit.choose(x).payment;
            // float gradients carry solver noise proportional to |x|
            let scale = x.iter().fold(S::max_of(S::one(), limsup_payment.abs()), |m, c| m + c.abs());
            let holds = limsup_payment.clone() - limit_payment.clone() <= tol.clone() * scale;
            PointwiseUsc {
                point: x.clone(),
                limsup_payment,
                limit_payment,
                holds,
            }
        })
        .collect();
    UscCheck {
        usc_holds: usc_slack >= -tol.clone() * S::max_of(S::one(), limsup_scale),
        revenue_sequence,
        limsup,
        limit_revenue,
        usc_slack,
        pointwise,
    }
}

#[derive(Clone, Debug)]
pub struct ConvergenceReport<S> {
    pub label: String,
    pub converged: bool,
    pub extrapolated: bool,
    pub first_converged_n: Option<usize>,
    pub window: usize,
    pub n_max: usize,
    pub grid: Vec<Vec<S>>,
    pub limit_values: Vec<S>,
    pub limit_mechanism: Option<Mechanism<S>>,
    pub sup_gap: S,
    pub revenue_sequence: Vec<S>,
    pub limsup: S,
    pub limit_revenue: Option<S>,
    pub usc_slack: Option<S>,
    pub usc_holds: Option<bool>,
    pub pointwise: Vec<PointwiseUsc<S>>,
}

#[derive(Clone, Debug)]
pub struct ConvergeOptions<S> {
    pub n_max: usize,
    pub tol: S,
    pub window: usize,
    /// Probe grid; defaults to the box around the support.
    pub grid: Option<Vec<Vec<S>>>,
}

impl<S: Scalar> Default for ConvergeOptions<S> {
    fn default() -> Self {
        Self {
            n_max: 200,
            tol: S::tol(),
            window: DEFAULT_WINDOW,
            grid: None,
        }
    }
}

/// Default probe grid: the box around the support, plus the support and
/// the origin.
pub fn default_grid<S: Scalar>(dist: &DiscreteValuation<S>) -> Result<Vec<Vec<S>>> {
    let boxed = grid::default_box(dist.support())
        .ok_or_else(|| Error::Unsupported("an explicit grid for more than 3 goods".into()))?;
    Ok(grid::with_points(boxed, dist.support()))
}

/// The full pipeline: limit payoff, limit mechanism anchored at the support,
/// and the usc comparison.
pub fn converge<S: Scalar>(
    seq: &MechanismSequence<S>,
    dist: &DiscreteValuation<S>,
    opts: &ConvergeOptions<S>,
) -> Result<ConvergenceReport<S>> {
    let grid = match &opts.grid {
        Some(g) => grid::with_points(g.clone(), dist.support()),
        None => default_grid(dist)?,
    };
    let est = limit_payoff(seq, &grid, opts.n_max, &opts.tol, opts.window)?;
    let (limit_mechanism, usc) = if est.converged {
        let limit = build_limit_mechanism(&est.values, &grid, seq.gamma(), dist.support())?;
        let usc = check_usc(seq, &limit, dist, opts.n_max, &opts.tol, opts.window);
        (Some(limit), usc)
    } else {
        let null = Mechanism::new(seq.menu(opts.n_max));
        let mut usc = check_usc(seq, &null, dist, opts.n_max, &opts.tol, opts.window);
        usc.pointwise.clear();
        (None, usc)
    };
    let have_limit = limit_mechanism.is_some();
    Ok(ConvergenceReport {
        label: seq.label().to_string(),
        converged: est.converged,
        extrapolated: est.extrapolated,
        first_converged_n: est.first_converged_n,
        window: opts.window,
        n_max: opts.n_max,
        grid,
        limit_values: est.values,
        limit_mechanism,
        sup_gap: est.sup_gap,
        revenue_sequence: usc.revenue_sequence,
        limsup: usc.limsup,
        limit_revenue: have_limit.then_some(usc.limit_revenue),
        usc_slack: have_limit.then_some(usc.usc_slack),
        usc_holds: have_limit.then_some(usc.usc_holds),
        pointwise: usc.pointwise,
    })
}

/// The heavy-tailed single-good valuation truncated at `N`:
/// `P[X = n] = 1/((n+1)(n+2))` for `n < N` and the tail mass `1/(N+1)` at `N`,
/// so `P[X >= t] = 1/(t+1)` for integers `t <= N`.
pub fn heavy_tail<S: Scalar>(truncation: usize) -> Result<DiscreteValuation<S>> {
    let big_n = truncation as i64;
    let support = (0..=big_n).map(|n| vec![S::from_i64(n)]).collect();
    let probs = (0..=big_n)
        .map(|n| {
            if n < big_n {
                S::from_ratio(1, (n + 1) * (n + 2))
            } else {
                S::from_ratio(1, big_n + 1)
            }
        })
        .collect();
    DiscreteValuation::new(support, probs)
}

/// `P[X >= p]` for the untruncated heavy-tailed valuation (integer-valued).
pub fn heavy_tail_survival<S: Scalar>(price: &S) -> S {
    if !price.is_positive() {
        return S::one();
    }
    let mut t = S::zero();
    while t < *price {
        t = t + S::one();
    }
    S::one() / (t + S::one())
}

#[derive(Clone, Debug, PartialEq)]
pub struct PriceCheck<S> {
    pub price: S,
    /// `p · P[X >= p]` for the untruncated model.
    pub formula: S,
    /// Revenue of the posted price on the truncated model.
    pub truncated: Option<S>,
    pub matches: bool,
}

#[derive(Clone, Debug)]
pub struct HeavyTailReport<S> {
    pub truncation: usize,
    pub prices: Vec<PriceCheck<S>>,
    /// Revenue of price `n` on the truncated model, `n = 1..=n_max`.
    pub escaping_revenues: Vec<S>,
    pub escaping_expected_ok: bool,
    pub sup_revenue: S,
    pub limit_grid: Vec<Vec<S>>,
    pub limit_values: Vec<S>,
    pub limit_mechanism: Mechanism<S>,
    pub limit_revenue: S,
    /// Pipeline run on a small truncation where the tail beyond it is visible.
    pub finite_truncation: ConvergenceReport<S>,
}

#[derive(Clone, Debug)]
pub struct HeavyTailOptions {
    pub truncation: usize,
    pub prices: Vec<i64>,
    pub n_max: usize,
    pub grid_max: i64,
    pub small_truncation: usize,
}

impl Default for HeavyTailOptions {
    fn default() -> Self {
        Self {
            truncation: 10_000,
            prices: vec![1, 10, 100, 999],
            n_max: 50,
            grid_max: 4,
            small_truncation: 10,
        }
    }
}

/// Posted prices on the heavy-tailed valuation, and the escaping family
/// `p_n = n` whose revenues approach 1 while its pointwise limit is the
/// null mechanism.
pub fn infinite_expectation_demo<S: Scalar>(opts: &HeavyTailOptions) -> Result<HeavyTailReport<S>> {
    if opts.truncation < 2 {
        return Err(Error::Schema("truncation must be at least 2".into()));
    }
    let x = heavy_tail::<S>(opts.truncation)?;
    let gamma = Arc::new(AllocationSet::standard(crate::StandardKind::Cube, 1)?);
    let posted = |p: S| -> Result<Mechanism<S>> {
        Ok(Mechanism::new(crate::solver::bundle_price_menu(&gamma, p)?))
    };

    let prices = opts
        .prices
        .iter()
        .map(|&p| {
            let price = S::from_i64(p);
            let formula = price.clone() * heavy_tail_survival(&price);
            let truncated = if p as usize <= opts.truncation {
                Some(posted(price.clone())?.revenue(&x))
            } else {
                None
            };
            let matches = truncated.as_ref().is_none_or(|t| *t == formula)
                && formula == price.clone() / (price.clone() + S::one());
            Ok(PriceCheck {
                price,
                formula,
                truncated,
                matches,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let seq = MechanismSequence::bundle_price(gamma.clone(), PriceSchedule::escaping())?;
    let escaping_revenues: Vec<S> = (1..=opts.n_max)
        .into_par_iter()
        .map(|n| seq.mechanism(n).revenue(&x))
        .collect();
    let escaping_expected_ok = escaping_revenues.iter().enumerate().all(|(i, r)| {
        let n = i + 1;
        let expected = if n <= opts.truncation {
            S::from_ratio(n as i64, n as i64 + 1)
        } else {
            S::zero()
        };
        *r == expected
    });
    let sup_revenue = escaping_revenues.iter().cloned().reduce(S::max_of).unwrap_or_else(S::zero);

    let limit_grid = grid::box_grid(1, &S::from_i64(opts.grid_max), 9);
    let est = limit_payoff(&seq, &limit_grid, opts.n_max, &S::tol(), DEFAULT_WINDOW)?;
    if !est.converged {
        return Err(Error::Unsupported(format!(
            "n_max > grid_max + {DEFAULT_WINDOW} so the escaping family settles on the grid"
        )));
    }
    let limit_mechanism = build_limit_mechanism(&est.values, &limit_grid, &gamma, &[])?;
    let limit_revenue = limit_mechanism.revenue(&x);

    let small = heavy_tail::<S>(opts.small_truncation.max(2))?;
    let finite_truncation = converge(
        &seq,
        &small,
        &ConvergeOptions {
            n_max: 3 * opts.small_truncation.max(2) + DEFAULT_WINDOW,
            ..ConvergeOptions::default()
        },
    )?;

    Ok(HeavyTailReport {
        truncation: opts.truncation,
        prices,
        escaping_revenues,
        escaping_expected_ok,
        sup_revenue,
        limit_grid,
        limit_values: est.values,
        limit_mechanism,
        limit_revenue,
        finite_truncation,
    })
}

#[derive(Clone, Debug)]
pub struct MonotoneLimitReport<S> {
    pub mode: MonotoneMode,
    /// Indices `n` whose member fails the property on the grid.
    pub member_failures: Vec<usize>,
    pub converged: bool,
    pub limit_mechanism: Option<Mechanism<S>>,
    pub limit_report: VerificationReport<S>,
    pub limit_supermodular: Option<bool>,
    pub holds: bool,
}

/// Checks that a property of every member survives in the limit:
/// payment monotonicity, or supermodularity of the payoff (with allocation
/// monotonicity reported alongside).
pub fn monotone_limit_check<S: Scalar>(
    seq: &MechanismSequence<S>,
    grid: &[Vec<S>],
    mode: MonotoneMode,
    n_max: usize,
    tol: &S,
) -> Result<MonotoneLimitReport<S>> {
    let member_failures: Vec<usize> = (1..=n_max)
        .into_par_iter()
        .filter(|&n| {
            let m = seq.mechanism(n);
            match mode {
                MonotoneMode::Payment => !m.verify_monotone_payment(grid).passed,
                MonotoneMode::Allocation => !m.payoff_function().check_supermodular(grid).supermodular,
            }
        })
        .collect();
    let est = limit_payoff(seq, grid, n_max, tol, DEFAULT_WINDOW)?;
    if !est.converged {
        return Ok(MonotoneLimitReport {
            mode,
            member_failures,
            converged: false,
            limit_mechanism: None,
            limit_report: VerificationReport::default(),
            limit_supermodular: None,
            holds: false,
        });
    }
    let limit = build_limit_mechanism(&est.values, grid, seq.gamma(), grid)?;
    let (limit_report, limit_supermodular) = match mode {
        MonotoneMode::Payment => (limit.verify_monotone_payment(grid), None),
        MonotoneMode::Allocation => {
            let sm = limit.payoff_function().check_supermodular(grid).supermodular;
            (limit.verify_monotone_allocation(grid), Some(sm))
        }
    };
    let holds = match mode {
        MonotoneMode::Payment => limit_report.passed,
        MonotoneMode::Allocation => limit_supermodular == Some(true),
    };
    Ok(MonotoneLimitReport {
        mode,
        member_failures,
        converged: true,
        limit_mechanism: Some(limit),
        limit_report,
        limit_supermodular,
        holds,
    })
}

#[derive(Clone, Debug)]
pub struct WrongWayReport<S> {
    pub limit_menu: Menu<S>,
    pub tie_point: Vec<S>,
    pub seller_favorable: VerificationReport<S>,
    pub adverse: VerificationReport<S>,
}

/// Payment-monotone menus `{0, (e1, 1 + 1/n), (1, 2 + 1/n)}` on two goods.
/// Their limit is payment monotone under seller-favorable ties, but taking
/// the cheapest offer at the triple tie `(1, 1)` breaks monotonicity
/// against `(1, 0)`.
pub fn wrong_way_demo<S: Scalar>() -> Result<WrongWayReport<S>> {
    let gamma = Arc::new(AllocationSet::standard(crate::StandardKind::Cube, 2)?);
    let one = S::one();
    let zero = S::zero();
    let g = gamma.clone();
    let seq = MechanismSequence::new(
        gamma.clone(),
        "wrong_way",
        Arc::new(move |n| {
            let w = S::one() / from_usize::<S>(n);
            Menu::with_null(
                g.clone(),
                vec![
                    MenuItem::new(vec![S::one(), S::zero()], S::one() + w.clone()),
                    MenuItem::new(vec![S::one(), S::one()], S::from_i64(2) + w),
                ],
            )
            .expect("cube allocations")
        }),
    );
    let axis = grid::linspace(&zero, &S::from_i64(2), 4);
    let grid = grid::product(&[axis.clone(), axis]);
    let check = monotone_limit_check(&seq, &grid, MonotoneMode::Payment, 40, &S::tol())?;
    let limit = check
        .limit_mechanism
        .ok_or_else(|| Error::Unsupported("a convergent sequence".into()))?;
    let tie_point = vec![one.clone(), one];
    let adverse = Mechanism::with_tie_rule(limit.menu.clone(), TieRule::AdverseAt(tie_point.clone()));
    Ok(WrongWayReport {
        limit_menu: limit.menu.clone(),
        tie_point,
        seller_favorable: check.limit_report,
        adverse: adverse.verify_monotone_payment(&grid),
    })
}
