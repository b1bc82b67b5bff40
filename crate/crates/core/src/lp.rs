//! Dense two-phase simplex over any [`Scalar`].
//!
//! All structural variables are nonnegative. In exact mode the pivot rule is
//! Bland's (guaranteed termination); in float mode a steepest-edge pricing is
//! used until a run of degenerate pivots triggers the switch to Bland.
//!
//! Ties between multiple optima are broken by [`LinearProgram::solve_lexicographic`]:
//! after each objective is optimal, every nonbasic column with a strictly
//! negative reduced cost is frozen at zero (that set describes the optimal
//! face exactly), and the next objective is maximized over what remains.

use thiserror::Error;

use crate::numeric::{NumericMode, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug)]
pub struct Constraint<S> {
    pub coeffs: Vec<(usize, S)>,
    pub relation: Relation,
    pub rhs: S,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum LpError {
    #[error("infeasible")]
    Infeasible,
    #[error("unbounded")]
    Unbounded,
    #[error("iteration limit {0} reached")]
    IterationLimit(usize),
}

#[derive(Clone, Debug)]
pub struct LpSolution<S> {
    pub values: Vec<S>,
    /// Value of the primary objective.
    pub objective: S,
    pub iterations: usize,
}

/// `maximize c·x  s.t.  rows,  x >= 0`.
#[derive(Clone, Debug)]
pub struct LinearProgram<S> {
    num_vars: usize,
    objective: Vec<S>,
    constraints: Vec<Constraint<S>>,
}

impl<S: Scalar> LinearProgram<S> {
    pub fn new(num_vars: usize) -> Self {
        Self {
            num_vars,
            objective: vec![S::zero(); num_vars],
            constraints: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn maximize(&mut self, objective: Vec<S>) {
        assert_eq!(objective.len(), self.num_vars);
        self.objective = objective;
    }

    pub fn add_constraint(&mut self, coeffs: Vec<(usize, S)>, relation: Relation, rhs: S) {
        debug_assert!(coeffs.iter().all(|(j, _)| *j < self.num_vars));
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
        });
    }

    pub fn solve(&self) -> Result<LpSolution<S>, LpError> {
        self.solve_lexicographic(&[])
    }

    /// Maximizes the primary objective, then each of `secondary` in turn over
    /// the optimal face of everything before it.
    pub fn solve_lexicographic(&self, secondary: &[Vec<S>]) -> Result<LpSolution<S>, LpError> {
        let mut tab = Tableau::build(self);
        tab.phase_one()?;
        tab.set_objective(&self.objective);
        tab.optimize()?;
        for obj in secondary {
            assert_eq!(obj.len(), self.num_vars);
            tab.freeze_suboptimal_columns();
            tab.set_objective(obj);
            tab.optimize()?;
        }
        if S::MODE == NumericMode::Float {
            tab.refine_basic_values();
        }
        let values = tab.structural_values(self.num_vars);
        let objective = self
            .objective
            .iter()
            .zip(&values)
            .fold(S::zero(), |acc, (c, x)| acc + c.clone() * x.clone());
        Ok(LpSolution {
            values,
            objective,
            iterations: tab.iterations,
        })
    }
}

struct Tableau<S> {
    rows: Vec<Vec<S>>,
    /// Reduced costs; the last entry holds minus the objective value.
    obj: Vec<S>,
    basis: Vec<usize>,
    banned: Vec<bool>,
    artificial_start: usize,
    width: usize,
    iterations: usize,
    max_iterations: usize,
    /// Initial rows, kept in float mode to recompute the final basic values.
    original: Vec<Vec<f64>>,
}

const DEGENERATE_RUN_BEFORE_BLAND: usize = 50;

impl<S: Scalar> Tableau<S> {
    fn build(lp: &LinearProgram<S>) -> Self {
        let m = lp.constraints.len();
        let n = lp.num_vars;
        let slack_count = lp
            .constraints
            .iter()
            .filter(|c| c.relation != Relation::Eq)
            .count();
        // rows with rhs < 0 flip their relation, so count artificials after normalizing
        let normalized: Vec<(Vec<(usize, S)>, Relation, S)> = lp
            .constraints
            .iter()
            .map(|c| {
                if c.rhs < S::zero() {
                    let flipped = match c.relation {
                        Relation::Le => Relation::Ge,
                        Relation::Ge => Relation::Le,
                        Relation::Eq => Relation::Eq,
                    };
                    let coeffs = c.coeffs.iter().map(|(j, v)| (*j, -v.clone())).collect();
                    (coeffs, flipped, -c.rhs.clone())
                } else {
                    (c.coeffs.clone(), c.relation, c.rhs.clone())
                }
            })
            .collect();
        let artificial_count = normalized
            .iter()
            .filter(|(_, r, _)| *r != Relation::Le)
            .count();
        let artificial_start = n + slack_count;
        let total = artificial_start + artificial_count;
        let width = total + 1;

        let mut rows = Vec::with_capacity(m);
        let mut basis = Vec::with_capacity(m);
        let mut next_slack = n;
        let mut next_art = artificial_start;
        for (coeffs, relation, rhs) in normalized {
            let mut row = vec![S::zero(); width];
            for (j, v) in coeffs {
                row[j] = row[j].clone() + v;
            }
            row[total] = rhs;
            match relation {
                Relation::Le => {
                    row[next_slack] = S::one();
                    basis.push(next_slack);
                    next_slack += 1;
                }
                Relation::Ge => {
                    row[next_slack] = -S::one();
                    next_slack += 1;
                    row[next_art] = S::one();
                    basis.push(next_art);
                    next_art += 1;
                }
                Relation::Eq => {
                    row[next_art] = S::one();
                    basis.push(next_art);
                    next_art += 1;
                }
            }
            rows.push(row);
        }
        let original = if S::MODE == NumericMode::Float {
            rows.iter().map(|r| r.iter().map(S::to_f64).collect()).collect()
        } else {
            Vec::new()
        };
        Self {
            original,
            rows,
            obj: vec![S::zero(); width],
            basis,
            banned: vec![false; total],
            artificial_start,
            width,
            iterations: 0,
            max_iterations: 200 * (width + m) + 10_000,
        }
    }

    fn rhs_index(&self) -> usize {
        self.width - 1
    }

    fn set_objective(&mut self, structural: &[S]) {
        let mut cost = vec![S::zero(); self.width - 1];
        cost[..structural.len()].clone_from_slice(structural);
        self.set_full_objective(&cost);
    }

    fn set_full_objective(&mut self, cost: &[S]) {
        let mut obj: Vec<S> = cost.to_vec();
        obj.push(S::zero());
        for (row, &b) in self.rows.iter().zip(&self.basis) {
            let cb = &cost[b];
            if cb.is_zero() {
                continue;
            }
            for (o, v) in obj.iter_mut().zip(row) {
                if !v.is_zero() {
                    *o = o.clone() - cb.clone() * v.clone();
                }
            }
        }
        self.obj = obj;
    }

    fn phase_one(&mut self) -> Result<(), LpError> {
        let total = self.width - 1;
        if self.artificial_start == total {
            return Ok(());
        }
        let mut cost = vec![S::zero(); total];
        for c in cost.iter_mut().skip(self.artificial_start) {
            *c = -S::one();
        }
        self.set_full_objective(&cost);
        self.optimize()?;
        let infeasibility = self.obj[self.rhs_index()].clone(); // = sum of artificials
        let scale = self
            .rows
            .iter()
            .map(|r| r[self.rhs_index()].abs())
            .fold(S::one(), S::max_of);
        if infeasibility > S::tol() * scale {
            return Err(LpError::Infeasible);
        }
        // drive remaining artificials out of the basis
        let mut r = 0;
        while r < self.rows.len() {
            if self.basis[r] >= self.artificial_start {
                let eps = S::pivot_eps();
                let col = (0..self.artificial_start)
                    .filter(|&j| !self.banned[j])
                    .max_by(|&a, &b| {
                        crate::numeric::cmp_scalar(&self.rows[r][a].abs(), &self.rows[r][b].abs())
                            .then(b.cmp(&a))
                    })
                    .filter(|&j| self.rows[r][j].abs() > eps);
                match col {
                    Some(j) => self.pivot(r, j),
                    None => {
                        self.rows.remove(r);
                        self.basis.remove(r);
                        continue;
                    }
                }
            }
            r += 1;
        }
        for b in self.banned.iter_mut().skip(self.artificial_start) {
            *b = true;
        }
        Ok(())
    }

    fn freeze_suboptimal_columns(&mut self) {
        let eps = S::pivot_eps();
        let mut in_basis = vec![false; self.width - 1];
        for &b in &self.basis {
            in_basis[b] = true;
        }
        for j in 0..self.width - 1 {
            if !in_basis[j] && self.obj[j] < -eps.clone() {
                self.banned[j] = true;
            }
        }
    }

    fn optimize(&mut self) -> Result<(), LpError> {
        let eps = S::pivot_eps();
        let rhs = self.rhs_index();
        let mut bland = S::MODE == NumericMode::Exact;
        let mut degenerate_run = 0usize;
        loop {
            if self.iterations >= self.max_iterations {
                return Err(LpError::IterationLimit(self.iterations));
            }
            let entering = if bland {
                (0..rhs).find(|&j| !self.banned[j] && self.obj[j] > eps)
            } else {
                self.steepest_edge_column(&eps)
            };
            let Some(col) = entering else {
                return Ok(());
            };
            let leave = if S::MODE == NumericMode::Float {
                self.harris_row(col)
            } else {
                self.min_ratio_row(col, &eps)
            };
            let Some((row, ratio)) = leave else {
                return Err(LpError::Unbounded);
            };
            if ratio <= eps {
                degenerate_run += 1;
                if degenerate_run > DEGENERATE_RUN_BEFORE_BLAND {
                    bland = true;
                }
            } else {
                degenerate_run = 0;
            }
            self.pivot(row, col);
            self.iterations += 1;
        }
    }

    /// Smallest ratio, ties to the smallest basic index.
    fn min_ratio_row(&self, col: usize, eps: &S) -> Option<(usize, S)> {
        let rhs = self.rhs_index();
        let mut leave: Option<(usize, S)> = None;
        for (i, row) in self.rows.iter().enumerate() {
            let a = &row[col];
            if *a <= *eps {
                continue;
            }
            let ratio = row[rhs].clone() / a.clone();
            let better = match &leave {
                None => true,
                Some((li, best)) => ratio < *best || (ratio == *best && self.basis[i] < self.basis[*li]),
            };
            if better {
                leave = Some((i, ratio));
            }
        }
        leave
    }

    /// Two-pass ratio test: bound the step with every row relaxed by a small
    /// feasibility slack, then take the largest pivot among rows under that
    /// bound.
    fn harris_row(&self, col: usize) -> Option<(usize, S)> {
        const PIVOT_TOL: f64 = 1e-9;
        const FEAS_TOL: f64 = 1e-12;
        let rhs = self.rhs_index();
        let entries: Vec<(usize, f64, f64)> = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, row)| (i, row[col].to_f64(), row[rhs].to_f64().max(0.0)))
            .filter(|&(_, a, _)| a > PIVOT_TOL)
            .collect();
        let bound = entries
            .iter()
            .map(|&(_, a, b)| (b + FEAS_TOL) / a)
            .fold(f64::INFINITY, f64::min);
        let (i, a, b) = entries
            .into_iter()
            .filter(|&(_, a, b)| b / a <= bound)
            .max_by(|x, y| x.1.total_cmp(&y.1).then(self.basis[y.0].cmp(&self.basis[x.0])))?;
        Some((i, S::from_f64(b / a).expect("finite ratio")))
    }

    fn steepest_edge_column(&self, eps: &S) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.width - 1 {
            if self.banned[j] || self.obj[j] <= *eps {
                continue;
            }
            let d = self.obj[j].to_f64();
            let norm: f64 = 1.0
                + self
                    .rows
                    .iter()
                    .map(|r| r[j].to_f64().powi(2))
                    .sum::<f64>();
            let score = d * d / norm;
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((j, score));
            }
        }
        best.map(|(j, _)| j)
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let mut prow = std::mem::take(&mut self.rows[r]);
        let p = prow[c].clone();
        for v in prow.iter_mut() {
            if !v.is_zero() {
                *v = v.clone() / p.clone();
            }
        }
        prow[c] = S::one();
        let nz: Vec<usize> = (0..prow.len()).filter(|&j| !prow[j].is_zero()).collect();
        let float = S::MODE == NumericMode::Float;
        let eliminate = |row: &mut Vec<S>| {
            let f = row[c].clone();
            if f.is_zero() {
                return;
            }
            for &j in &nz {
                let v = row[j].clone() - f.clone() * prow[j].clone();
                row[j] = if float && v.abs().to_f64() < 1e-14 {
                    S::zero()
                } else {
                    v
                };
            }
            row[c] = S::zero();
        };
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i != r {
                eliminate(row);
            }
        }
        eliminate(&mut self.obj);
        self.rows[r] = prow;
        self.basis[r] = c;
        if float {
            let rhs = self.rhs_index();
            for row in self.rows.iter_mut() {
                if row[rhs] < S::zero() {
                    row[rhs] = S::zero();
                }
            }
        }
    }

    /// Solves `B x_B = b` against the initial rows with partial pivoting and
    /// replaces the tableau's right-hand side, which has accumulated rounding
    /// over many pivots. Left alone if the system looks singular or the fresh
    /// solution fits worse.
    fn refine_basic_values(&mut self) {
        let rhs = self.rhs_index();
        let m = self.basis.len();
        let mut sys: Vec<Vec<f64>> = self
            .original
            .iter()
            .map(|row| {
                let mut r: Vec<f64> = self.basis.iter().map(|&b| row[b]).collect();
                r.push(row[rhs]);
                r
            })
            .collect();
        let rows = sys.len();
        let mut pivot_rows = Vec::with_capacity(m);
        let mut used = vec![false; rows];
        for c in 0..m {
            let best = (0..rows)
                .filter(|&i| !used[i])
                .max_by(|&a, &b| sys[a][c].abs().total_cmp(&sys[b][c].abs()));
            let Some(p) = best.filter(|&p| sys[p][c].abs() > 1e-12) else {
                return;
            };
            used[p] = true;
            pivot_rows.push(p);
            let prow = sys[p].clone();
            for (i, row) in sys.iter_mut().enumerate() {
                if i == p || row[c] == 0.0 {
                    continue;
                }
                let f = row[c] / prow[c];
                for (v, pv) in row.iter_mut().zip(&prow).skip(c) {
                    *v -= f * pv;
                }
            }
        }
        let fresh: Vec<f64> = pivot_rows
            .iter()
            .enumerate()
            .map(|(c, &p)| sys[p][m] / sys[p][c])
            .collect();
        let residual = |x: &dyn Fn(usize) -> f64| {
            self.original
                .iter()
                .map(|row| {
                    let lhs: f64 = self.basis.iter().enumerate().map(|(i, &b)| row[b] * x(i)).sum();
                    (lhs - row[rhs]).abs()
                })
                .fold(0.0, f64::max)
        };
        let old: Vec<f64> = self.rows.iter().map(|r| r[rhs].to_f64()).collect();
        if residual(&|i| fresh[i]) > residual(&|i| old[i]) {
            return;
        }
        for (row, v) in self.rows.iter_mut().zip(fresh) {
            row[rhs] = S::from_f64(v.max(0.0)).expect("finite");
        }
    }

    fn structural_values(&self, n: usize) -> Vec<S> {
        let rhs = self.rhs_index();
        let mut x = vec![S::zero(); n];
        for (row, &b) in self.rows.iter().zip(&self.basis) {
            if b < n {
                let v = row[rhs].clone();
                x[b] = if S::MODE == NumericMode::Float && v.abs().to_f64() < 1e-12 {
                    S::zero()
                } else {
                    v
                };
            }
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::Rational;

    fn r(n: i64, d: i64) -> Rational {
        Rational::from_ratio(n, d)
    }

    #[test]
    fn textbook_maximum() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36
        let mut lp = LinearProgram::<Rational>::new(2);
        lp.maximize(vec![r(3, 1), r(5, 1)]);
        lp.add_constraint(vec![(0, r(1, 1))], Relation::Le, r(4, 1));
        lp.add_constraint(vec![(1, r(2, 1))], Relation::Le, r(12, 1));
        lp.add_constraint(vec![(0, r(3, 1)), (1, r(2, 1))], Relation::Le, r(18, 1));
        let sol = lp.solve().unwrap();
        assert_eq!(sol.objective, r(36, 1));
        assert_eq!(sol.values, vec![r(2, 1), r(6, 1)]);
    }

    #[test]
    fn equality_and_negative_rhs_need_phase_one() {
        // max x + y, x + y = 1, -x <= -1/4 (x >= 1/4)
        let mut lp = LinearProgram::<f64>::new(2);
        lp.maximize(vec![1.0, 2.0]);
        lp.add_constraint(vec![(0, 1.0), (1, 1.0)], Relation::Eq, 1.0);
        lp.add_constraint(vec![(0, -1.0)], Relation::Le, -0.25);
        let sol = lp.solve().unwrap();
        assert!((sol.objective - 1.75).abs() < 1e-12);
        assert!((sol.values[0] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let mut lp = LinearProgram::<Rational>::new(1);
        lp.add_constraint(vec![(0, r(1, 1))], Relation::Ge, r(2, 1));
        lp.add_constraint(vec![(0, r(1, 1))], Relation::Le, r(1, 1));
        assert_eq!(lp.solve().unwrap_err(), LpError::Infeasible);

        let mut lp = LinearProgram::<Rational>::new(2);
        lp.maximize(vec![r(1, 1), r(0, 1)]);
        lp.add_constraint(vec![(1, r(1, 1))], Relation::Le, r(1, 1));
        assert_eq!(lp.solve().unwrap_err(), LpError::Unbounded);
    }

    #[test]
    fn lexicographic_pass_picks_the_preferred_optimum() {
        // max x + y over x + y <= 1: every point of the segment is optimal;
        // secondary max y picks (0, 1), secondary max x picks (1, 0).
        let mut lp = LinearProgram::<Rational>::new(2);
        lp.maximize(vec![r(1, 1), r(1, 1)]);
        lp.add_constraint(vec![(0, r(1, 1)), (1, r(1, 1))], Relation::Le, r(1, 1));
        let y_first = lp.solve_lexicographic(&[vec![r(0, 1), r(1, 1)]]).unwrap();
        assert_eq!(y_first.values, vec![r(0, 1), r(1, 1)]);
        let x_first = lp.solve_lexicographic(&[vec![r(1, 1), r(0, 1)]]).unwrap();
        assert_eq!(x_first.values, vec![r(1, 1), r(0, 1)]);
        assert_eq!(x_first.objective, r(1, 1));
    }

    #[test]
    fn redundant_equalities_are_dropped() {
        let mut lp = LinearProgram::<Rational>::new(2);
        lp.maximize(vec![r(1, 1), r(0, 1)]);
        lp.add_constraint(vec![(0, r(1, 1)), (1, r(1, 1))], Relation::Eq, r(1, 1));
        lp.add_constraint(vec![(0, r(2, 1)), (1, r(2, 1))], Relation::Eq, r(2, 1));
        let sol = lp.solve().unwrap();
        assert_eq!(sol.objective, r(1, 1));
    }
}
