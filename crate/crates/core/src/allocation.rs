//! Compact allocation sets Γ ⊂ R₊ᵏ: finite sets and polytopes.
//!
//! Every set carries its vertex list (sorted lexicographically ascending), so
//! the norm bound and support function are plain scans. Polytopes may also
//! carry halfspaces `normal · g <= offset`; when only halfspaces are given the
//! vertices are enumerated on construction (k <= 4).

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::lp::{LinearProgram, Relation};
use crate::numeric::Scalar;
use crate::vecops::{dot, lex_cmp, norm_f64, norm_sq, sub};

/// Largest dimension for which representations are converted on demand.
pub const MAX_CONVERSION_DIM: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AllocationKind {
    Finite,
    Polytope,
}

/// The standard allocation sets for k goods.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StandardKind {
    /// `[0,1]^k`, randomized additive.
    Cube,
    /// `{0,1}^k`, deterministic additive.
    CubeVertices,
    /// `{g in [0,1]^k : sum g <= 1}`, randomized unit demand.
    UnitDemand,
    /// `{0, e1, ..., ek}`, deterministic unit demand.
    UnitDemandDet,
    /// `{g in [0,1]^k : sum g = 1}`, randomized choice among k options.
    SimplexEq,
    /// `{e1, ..., ek}`, deterministic choice among k options.
    SimplexVertices,
    /// `{0, 1}` (all-zero and all-one vectors): grand bundle only.
    BundlePair,
}

impl StandardKind {
    pub const ALL: [StandardKind; 7] = [
        StandardKind::Cube,
        StandardKind::CubeVertices,
        StandardKind::UnitDemand,
        StandardKind::UnitDemandDet,
        StandardKind::SimplexEq,
        StandardKind::SimplexVertices,
        StandardKind::BundlePair,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StandardKind::Cube => "cube",
            StandardKind::CubeVertices => "cube_vertices",
            StandardKind::UnitDemand => "unit_demand",
            StandardKind::UnitDemandDet => "unit_demand_det",
            StandardKind::SimplexEq => "simplex_eq",
            StandardKind::SimplexVertices => "simplex_vertices",
            StandardKind::BundlePair => "bundle_pair",
        }
    }

    pub fn kind(self) -> AllocationKind {
        match self {
            StandardKind::Cube | StandardKind::UnitDemand | StandardKind::SimplexEq => {
                AllocationKind::Polytope
            }
            _ => AllocationKind::Finite,
        }
    }
}

impl fmt::Display for StandardKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StandardKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StandardKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownKind(s.to_string()))
    }
}

/// `normal · g <= offset`.
#[derive(Clone, Debug, PartialEq)]
pub struct Halfspace<S> {
    pub normal: Vec<S>,
    pub offset: S,
}

impl<S: Scalar> Halfspace<S> {
    pub fn new(normal: Vec<S>, offset: S) -> Self {
        Self { normal, offset }
    }

    fn violation(&self, g: &[S]) -> S {
        dot(&self.normal, g) - self.offset.clone()
    }
}

#[derive(Clone, Debug)]
pub struct AllocationSet<S> {
    dim: usize,
    kind: AllocationKind,
    vertices: Vec<Vec<S>>,
    halfspaces: Option<Vec<Halfspace<S>>>,
    gamma_norm_sq: S,
    standard: Option<StandardKind>,
}

impl<S: Scalar> AllocationSet<S> {
    /// One of the standard sets for `k` goods.
    pub fn standard(kind: StandardKind, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::ZeroDimension);
        }
        let unit = |i: usize| {
            let mut e = vec![S::zero(); k];
            e[i] = S::one();
            e
        };
        let zero = vec![S::zero(); k];
        let nonneg = || -> Vec<Halfspace<S>> {
            (0..k)
                .map(|i| Halfspace::new(crate::vecops::scale(&unit(i), &-S::one()), S::zero()))
                .collect()
        };
        let ones = vec![S::one(); k];
        let (vertices, halfspaces) = match kind {
            StandardKind::Cube | StandardKind::CubeVertices => {
                let vertices = (0..1usize << k)
                    .map(|mask| {
                        (0..k)
                            .map(|i| if mask >> (k - 1 - i) & 1 == 1 { S::one() } else { S::zero() })
                            .collect()
                    })
                    .collect();
                let mut hs = nonneg();
                hs.extend((0..k).map(|i| Halfspace::new(unit(i), S::one())));
                (vertices, hs)
            }
            StandardKind::UnitDemand | StandardKind::UnitDemandDet => {
                let mut v = vec![zero.clone()];
                v.extend((0..k).map(unit));
                let mut hs = nonneg();
                hs.push(Halfspace::new(ones.clone(), S::one()));
                (v, hs)
            }
            StandardKind::SimplexEq | StandardKind::SimplexVertices => {
                let v = (0..k).map(unit).collect();
                let mut hs = nonneg();
                hs.push(Halfspace::new(ones.clone(), S::one()));
                hs.push(Halfspace::new(crate::vecops::scale(&ones, &-S::one()), -S::one()));
                (v, hs)
            }
            StandardKind::BundlePair => (vec![zero, ones], Vec::new()),
        };
        let halfspaces = (kind.kind() == AllocationKind::Polytope).then_some(halfspaces);
        let mut set = Self::assemble(k, kind.kind(), vertices, halfspaces)?;
        set.standard = Some(kind);
        Ok(set)
    }

    /// A finite set of allocations.
    pub fn finite(k: usize, points: Vec<Vec<S>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidAllocationSet("finite set needs at least one point".into()));
        }
        Self::assemble(k, AllocationKind::Finite, points, None)
    }

    /// The convex hull of the given points.
    pub fn polytope_from_vertices(k: usize, vertices: Vec<Vec<S>>) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::InvalidAllocationSet("polytope needs at least one vertex".into()));
        }
        Self::assemble(k, AllocationKind::Polytope, vertices, None)
    }

    /// A polytope given by halfspaces; vertices are enumerated (k <= 4).
    pub fn polytope_from_halfspaces(k: usize, halfspaces: Vec<Halfspace<S>>) -> Result<Self> {
        if k == 0 {
            return Err(Error::ZeroDimension);
        }
        if k > MAX_CONVERSION_DIM {
            return Err(Error::Unsupported(format!(
                "vertices for k = {k} > {MAX_CONVERSION_DIM}; supply both representations"
            )));
        }
        let vertices = enumerate_vertices(k, &halfspaces)?;
        if vertices.is_empty() {
            return Err(Error::InvalidAllocationSet("halfspaces describe an empty set".into()));
        }
        Self::assemble(k, AllocationKind::Polytope, vertices, Some(halfspaces))
    }

    /// A polytope with both representations; they are checked for consistency.
    pub fn polytope(k: usize, vertices: Vec<Vec<S>>, halfspaces: Vec<Halfspace<S>>) -> Result<Self> {
        Self::assemble(k, AllocationKind::Polytope, vertices, Some(halfspaces))
    }

    fn assemble(
        k: usize,
        kind: AllocationKind,
        mut vertices: Vec<Vec<S>>,
        halfspaces: Option<Vec<Halfspace<S>>>,
    ) -> Result<Self> {
        if k == 0 {
            return Err(Error::ZeroDimension);
        }
        for v in &vertices {
            if v.len() != k {
                return Err(Error::DimensionMismatch { expected: k, got: v.len() });
            }
            if v.iter().any(|c| *c < S::zero()) {
                return Err(Error::InvalidAllocationSet(format!(
                    "allocation {:?} has a negative coordinate",
                    crate::vecops::to_f64_vec(v)
                )));
            }
        }
        if let Some(hs) = &halfspaces {
            for h in hs {
                if h.normal.len() != k {
                    return Err(Error::DimensionMismatch { expected: k, got: h.normal.len() });
                }
            }
            for v in &vertices {
                if hs.iter().any(|h| h.violation(v) > S::tol()) {
                    return Err(Error::InvalidAllocationSet(format!(
                        "vertex {:?} violates a halfspace",
                        crate::vecops::to_f64_vec(v)
                    )));
                }
            }
        }
        vertices.sort_by(|a, b| lex_cmp(a, b));
        vertices.dedup();
        let gamma_norm_sq = vertices
            .iter()
            .map(|v| norm_sq(v))
            .fold(S::zero(), S::max_of);
        Ok(Self {
            dim: k,
            kind,
            vertices,
            halfspaces,
            gamma_norm_sq,
            standard: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> AllocationKind {
        self.kind
    }

    pub fn standard_kind(&self) -> Option<StandardKind> {
        self.standard
    }

    pub fn vertices(&self) -> &[Vec<S>] {
        &self.vertices
    }

    pub fn halfspaces(&self) -> Option<&[Halfspace<S>]> {
        self.halfspaces.as_deref()
    }

    pub fn is_convex(&self) -> bool {
        self.kind == AllocationKind::Polytope || self.vertices.len() == 1
    }

    /// γ = max ‖g‖ over Γ (attained at a vertex since the norm is convex).
    pub fn gamma_norm(&self) -> f64 {
        self.gamma_norm_sq.to_f64().sqrt()
    }

    /// γ², exact in rational mode.
    pub fn gamma_norm_sq(&self) -> &S {
        &self.gamma_norm_sq
    }

    /// The convex hull of this set as a polytope.
    pub fn convex_hull(&self) -> Self {
        let mut hull = self.clone();
        hull.kind = AllocationKind::Polytope;
        hull.standard = match self.standard {
            Some(StandardKind::CubeVertices) => Some(StandardKind::Cube),
            Some(StandardKind::UnitDemandDet) => Some(StandardKind::UnitDemand),
            Some(StandardKind::SimplexVertices) => Some(StandardKind::SimplexEq),
            _ => None,
        };
        if let Some(std) = hull.standard {
            if let Ok(full) = Self::standard(std, self.dim) {
                hull.halfspaces = full.halfspaces;
            }
        }
        hull
    }

    /// `max_{g in Γ} g·y` with an attaining vertex; ties go to the
    /// lexicographically largest vertex.
    pub fn support_max(&self, y: &[S]) -> (S, Vec<S>) {
        let mut best: Option<(S, &Vec<S>)> = None;
        for v in &self.vertices {
            let val = dot(v, y);
            let replace = match &best {
                None => true,
                // vertices are sorted ascending, so >= keeps the largest witness
                Some((b, _)) => val >= *b,
            };
            if replace {
                best = Some((val, v));
            }
        }
        let (val, v) = best.expect("allocation set is nonempty");
        (val, v.clone())
    }

    /// Whether `g` lies within `tol` of Γ.
    ///
    /// Finite sets use the Euclidean distance to the nearest point. Polytopes
    /// with halfspaces test `normal·g - offset <= tol·‖normal‖` for every
    /// halfspace; vertex-only polytopes solve an L1-distance LP, which is
    /// conservative for `tol > 0` and exact at `tol = 0`.
    pub fn contains(&self, g: &[S], tol: &S) -> bool {
        if g.len() != self.dim {
            return false;
        }
        match self.kind {
            AllocationKind::Finite => {
                let tol_sq = tol.clone() * tol.clone();
                self.vertices.iter().any(|v| norm_sq(&sub(g, v)) <= tol_sq)
            }
            AllocationKind::Polytope => match &self.halfspaces {
                Some(hs) => {
                    if g.iter().any(|c| *c < -tol.clone()) {
                        return false;
                    }
                    hs.iter().all(|h| {
                        let allowed = if tol.is_zero() {
                            S::zero()
                        } else {
                            tol.clone()
                                * S::from_f64(norm_f64(&h.normal)).unwrap_or_else(S::one)
                        };
                        h.violation(g) <= allowed
                    })
                }
                None => self.l1_distance(g).is_some_and(|d| d <= *tol),
            },
        }
    }

    fn l1_distance(&self, g: &[S]) -> Option<S> {
        // variables: lambda (one per vertex), d_plus (k), d_minus (k)
        let nv = self.vertices.len();
        let k = self.dim;
        let mut lp = LinearProgram::new(nv + 2 * k);
        let mut obj = vec![S::zero(); nv + 2 * k];
        for c in obj.iter_mut().skip(nv) {
            *c = -S::one();
        }
        lp.maximize(obj);
        for i in 0..k {
            let mut row: Vec<(usize, S)> = self
                .vertices
                .iter()
                .enumerate()
                .filter(|(_, v)| !v[i].is_zero())
                .map(|(j, v)| (j, v[i].clone()))
                .collect();
            row.push((nv + i, S::one()));
            row.push((nv + k + i, -S::one()));
            lp.add_constraint(row, Relation::Eq, g[i].clone());
        }
        lp.add_constraint((0..nv).map(|j| (j, S::one())).collect(), Relation::Eq, S::one());
        lp.solve().ok().map(|s| -s.objective)
    }

    /// Componentwise-minimal element of Γ when one exists (the zero
    /// allocation for every standard set that contains it).
    pub fn least_element(&self) -> Option<Vec<S>> {
        let candidate = self
            .vertices
            .iter()
            .find(|v| self.vertices.iter().all(|w| crate::vecops::leq(v, w)))?;
        Some(candidate.clone())
    }
}

/// Enumerates the vertices of `{g : normal·g <= offset}` by solving every
/// k-subset of tight constraints.
fn enumerate_vertices<S: Scalar>(k: usize, hs: &[Halfspace<S>]) -> Result<Vec<Vec<S>>> {
    for h in hs {
        if h.normal.len() != k {
            return Err(Error::DimensionMismatch { expected: k, got: h.normal.len() });
        }
    }
    let mut out: Vec<Vec<S>> = Vec::new();
    let mut subset: Vec<usize> = (0..k).collect();
    if hs.len() < k {
        return Err(Error::InvalidAllocationSet("too few halfspaces to bound the set".into()));
    }
    loop {
        let a: Vec<Vec<S>> = subset.iter().map(|&i| hs[i].normal.clone()).collect();
        let b: Vec<S> = subset.iter().map(|&i| hs[i].offset.clone()).collect();
        if let Some(x) = solve_square(a, b) {
            if hs.iter().all(|h| h.violation(&x) <= S::tol()) {
                let x: Vec<S> = x
                    .into_iter()
                    .map(|c| if c.abs() <= S::tol() { S::zero() } else { c })
                    .collect();
                if !out.iter().any(|v| crate::vecops::sub(v, &x).iter().all(|c| c.abs() <= S::tol())) {
                    out.push(x);
                }
            }
        }
        // next k-combination in lexicographic order
        let m = hs.len();
        let Some(i) = (0..k).rev().find(|&i| subset[i] < m - k + i) else {
            return Ok(out);
        };
        subset[i] += 1;
        for j in i + 1..k {
            subset[j] = subset[j - 1] + 1;
        }
    }
}

/// Gaussian elimination with partial pivoting; `None` when singular.
pub(crate) fn solve_square<S: Scalar>(mut a: Vec<Vec<S>>, mut b: Vec<S>) -> Option<Vec<S>> {
    let n = b.len();
    let eps = S::pivot_eps();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| {
            crate::numeric::cmp_scalar(&a[i][col].abs(), &a[j][col].abs())
        })?;
        if a[piv][col].abs() <= eps {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col].clone() / a[col][col].clone();
            if f.is_zero() {
                continue;
            }
            for c in col..n {
                let v = a[row][c].clone() - f.clone() * a[col][c].clone();
                a[row][c] = v;
            }
            b[row] = b[row].clone() - f * b[col].clone();
        }
    }
    let mut x = vec![S::zero(); n];
    for row in (0..n).rev() {
        let mut acc = b[row].clone();
        for c in row + 1..n {
            acc = acc - a[row][c].clone() * x[c].clone();
        }
        x[row] = acc / a[row][row].clone();
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::Rational;

    fn q(n: i64) -> Rational {
        Rational::from_i64(n)
    }

    fn qv(v: &[i64]) -> Vec<Rational> {
        v.iter().map(|&x| q(x)).collect()
    }

    #[test]
    fn cube_two_has_four_vertices_and_root_two_norm() {
        let g = AllocationSet::<Rational>::standard(StandardKind::Cube, 2).unwrap();
        assert_eq!(g.kind(), AllocationKind::Polytope);
        assert_eq!(g.vertices(), &[qv(&[0, 0]), qv(&[0, 1]), qv(&[1, 0]), qv(&[1, 1])]);
        assert_eq!(*g.gamma_norm_sq(), q(2));
        assert!((g.gamma_norm() - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn deterministic_unit_demand_is_finite() {
        let g = AllocationSet::<Rational>::standard(StandardKind::UnitDemandDet, 2).unwrap();
        assert_eq!(g.kind(), AllocationKind::Finite);
        assert_eq!(g.vertices(), &[qv(&[0, 0]), qv(&[0, 1]), qv(&[1, 0])]);
        assert_eq!(g.gamma_norm(), 1.0);
        let g = AllocationSet::<Rational>::standard(StandardKind::SimplexVertices, 1).unwrap();
        assert_eq!(g.vertices(), &[qv(&[1])]);
        assert_eq!(g.gamma_norm(), 1.0);
    }

    #[test]
    fn gamma_norms() {
        let cube3 = AllocationSet::<f64>::standard(StandardKind::Cube, 3).unwrap();
        assert!((cube3.gamma_norm() - 3f64.sqrt()).abs() < 1e-15);
        let ud5 = AllocationSet::<f64>::standard(StandardKind::UnitDemand, 5).unwrap();
        assert_eq!(ud5.gamma_norm(), 1.0);
        let explicit = AllocationSet::<Rational>::finite(2, vec![qv(&[2, 0]), qv(&[0, 3])]).unwrap();
        assert_eq!(explicit.gamma_norm(), 3.0);
    }

    #[test]
    fn support_function_examples() {
        let cube = AllocationSet::<Rational>::standard(StandardKind::Cube, 2).unwrap();
        assert_eq!(cube.support_max(&qv(&[3, -1])), (q(3), qv(&[1, 0])));
        let ud = AllocationSet::<Rational>::standard(StandardKind::UnitDemandDet, 2).unwrap();
        assert_eq!(ud.support_max(&qv(&[-1, -2])), (q(0), qv(&[0, 0])));
        let simplex = AllocationSet::<Rational>::standard(StandardKind::SimplexEq, 3).unwrap();
        assert_eq!(simplex.support_max(&qv(&[1, 1, 1])), (q(1), qv(&[1, 0, 0])));
    }

    #[test]
    fn membership_examples() {
        let half = Rational::from_ratio(1, 2);
        let zero = Rational::from_i64(0);
        let cube = AllocationSet::<Rational>::standard(StandardKind::Cube, 2).unwrap();
        assert!(cube.contains(&[half.clone(), q(1)], &zero));
        let cv = AllocationSet::<Rational>::standard(StandardKind::CubeVertices, 2).unwrap();
        assert!(!cv.contains(&[half.clone(), half.clone()], &zero));
        let ud = AllocationSet::<Rational>::standard(StandardKind::UnitDemand, 2).unwrap();
        let six = Rational::from_ratio(3, 5);
        assert!(!ud.contains(&[six.clone(), six], &zero));
    }

    #[test]
    fn vertex_only_polytope_membership_uses_lp() {
        let tri = AllocationSet::<Rational>::polytope_from_vertices(
            2,
            vec![qv(&[0, 0]), qv(&[2, 0]), qv(&[0, 2])],
        )
        .unwrap();
        let zero = q(0);
        assert!(tri.contains(&qv(&[1, 1]), &zero));
        assert!(!tri.contains(&[Rational::from_ratio(3, 2), q(1)], &zero));
        assert!(tri.contains(&[Rational::from_ratio(3, 2), q(1)], &Rational::from_ratio(1, 2)));
    }

    #[test]
    fn halfspace_input_enumerates_vertices() {
        let cube = AllocationSet::<Rational>::standard(StandardKind::Cube, 3).unwrap();
        let hs = cube.halfspaces().unwrap().to_vec();
        let rebuilt = AllocationSet::polytope_from_halfspaces(3, hs).unwrap();
        assert_eq!(rebuilt.vertices(), cube.vertices());

        let simplex = AllocationSet::<Rational>::standard(StandardKind::SimplexEq, 3).unwrap();
        let rebuilt =
            AllocationSet::polytope_from_halfspaces(3, simplex.halfspaces().unwrap().to_vec()).unwrap();
        assert_eq!(rebuilt.vertices(), simplex.vertices());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            AllocationSet::<f64>::standard(StandardKind::Cube, 0),
            Err(Error::ZeroDimension)
        ));
        assert!(matches!("hexagon".parse::<StandardKind>(), Err(Error::UnknownKind(_))));
        assert!(AllocationSet::<f64>::finite(1, vec![vec![-1.0]]).is_err());
        assert!(AllocationSet::<f64>::finite(2, vec![]).is_err());
        // vertex outside the declared halfspaces
        assert!(AllocationSet::<f64>::polytope(
            1,
            vec![vec![2.0]],
            vec![Halfspace::new(vec![1.0], 1.0)]
        )
        .is_err());
    }

    #[test]
    fn least_element() {
        let ud = AllocationSet::<Rational>::standard(StandardKind::UnitDemandDet, 3).unwrap();
        assert_eq!(ud.least_element(), Some(qv(&[0, 0, 0])));
        let sv = AllocationSet::<Rational>::standard(StandardKind::SimplexVertices, 2).unwrap();
        assert_eq!(sv.least_element(), None);
    }
}
