//! Finite-support random valuations.

use crate::error::{Error, Result};
use crate::numeric::{from_usize, Scalar};
use crate::vecops::lex_cmp;

/// A distribution over finitely many distinct points of R₊ᵏ.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteValuation<S> {
    dim: usize,
    support: Vec<Vec<S>>,
    probs: Vec<S>,
    expectation: Vec<S>,
}

impl<S: Scalar> DiscreteValuation<S> {
    /// Zero probabilities are accepted; they matter for tests that add
    /// dummy types.
    pub fn new(support: Vec<Vec<S>>, probs: Vec<S>) -> Result<Self> {
        let bad = |m: &str| Err(Error::InvalidDistribution(m.to_string()));
        if support.is_empty() {
            return bad("support is empty");
        }
        if support.len() != probs.len() {
            return bad("support and probabilities differ in length");
        }
        let dim = support[0].len();
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        for x in &support {
            if x.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: x.len() });
            }
            if x.iter().any(|c| c.is_negative()) {
                return bad("support points must be nonnegative");
            }
        }
        let mut order: Vec<usize> = (0..support.len()).collect();
        order.sort_by(|&a, &b| lex_cmp(&support[a], &support[b]));
        if order.windows(2).any(|w| support[w[0]] == support[w[1]]) {
            return bad("support points must be distinct");
        }
        if probs.iter().any(|p| p.is_negative()) {
            return bad("probabilities must be nonnegative");
        }
        let total = S::sum_all(probs.clone());
        let err = (total - S::one()).abs();
        let limit = if S::MODE == crate::NumericMode::Exact {
            S::zero()
        } else {
            S::from_f64(1e-12).expect("finite")
        };
        if err > limit {
            return bad("probabilities must sum to 1");
        }
        let expectation = (0..dim)
            .map(|i| {
                S::sum_all(
                    support
                        .iter()
                        .zip(&probs)
                        .map(|(x, p)| x[i].clone() * p.clone())
                        .collect(),
                )
            })
            .collect();
        Ok(Self {
            dim,
            support,
            probs,
            expectation,
        })
    }

    pub fn uniform(support: Vec<Vec<S>>) -> Result<Self> {
        let n = support.len().max(1);
        let p = S::one() / from_usize::<S>(n);
        let probs = vec![p; support.len()];
        Self::new(support, probs)
    }

    pub fn point_mass(x: Vec<S>) -> Result<Self> {
        Self::new(vec![x], vec![S::one()])
    }

    /// Independent product of one-dimensional marginals.
    pub fn product(marginals: &[DiscreteValuation<S>]) -> Result<Self> {
        let mut support: Vec<Vec<S>> = vec![Vec::new()];
        let mut probs: Vec<S> = vec![S::one()];
        for m in marginals {
            if m.dim != 1 {
                return Err(Error::InvalidDistribution("product marginals must be one-dimensional".into()));
            }
            let mut next_s = Vec::with_capacity(support.len() * m.support.len());
            let mut next_p = Vec::with_capacity(next_s.capacity());
            for (x, p) in support.iter().zip(&probs) {
                for (y, q) in m.support.iter().zip(&m.probs) {
                    let mut z = x.clone();
                    z.push(y[0].clone());
                    next_s.push(z);
                    next_p.push(p.clone() * q.clone());
                }
            }
            support = next_s;
            probs = next_p;
        }
        Self::new(support, probs)
    }

    /// `k` independent copies of a one-dimensional distribution.
    pub fn iid(marginal: &DiscreteValuation<S>, k: usize) -> Result<Self> {
        Self::product(&vec![marginal.clone(); k])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn support(&self) -> &[Vec<S>] {
        &self.support
    }

    pub fn probs(&self) -> &[S] {
        &self.probs
    }

    pub fn expectation(&self) -> &[S] {
        &self.expectation
    }

    /// Distribution of coordinate `i`, with equal values merged.
    pub fn marginal(&self, i: usize) -> Self {
        self.pushforward(|x| x[i].clone())
    }

    /// Distribution of the sum of coordinates.
    pub fn bundle_sum(&self) -> Self {
        self.pushforward(|x| S::sum_all(x.to_vec()))
    }

    fn pushforward(&self, f: impl Fn(&[S]) -> S) -> Self {
        let mut pairs: Vec<(S, S)> = self
            .support
            .iter()
            .zip(&self.probs)
            .map(|(x, p)| (f(x), p.clone()))
            .collect();
        pairs.sort_by(|a, b| crate::numeric::cmp_scalar(&a.0, &b.0));
        let mut support: Vec<Vec<S>> = Vec::new();
        let mut groups: Vec<Vec<S>> = Vec::new();
        for (v, p) in pairs {
            if support.last().map(|l| l[0] == v).unwrap_or(false) {
                groups.last_mut().unwrap().push(p);
            } else {
                support.push(vec![v]);
                groups.push(vec![p]);
            }
        }
        let probs: Vec<S> = groups.into_iter().map(S::sum_all).collect();
        let expectation = vec![S::sum_all(
            support.iter().zip(&probs).map(|(x, p)| x[0].clone() * p.clone()).collect(),
        )];
        Self {
            dim: 1,
            support,
            probs,
            expectation,
        }
    }

    /// `E[‖X‖]` in floating point.
    pub fn expected_norm(&self) -> f64 {
        self.support
            .iter()
            .zip(&self.probs)
            .map(|(x, p)| crate::vecops::norm_f64(x) * p.to_f64())
            .sum()
    }

    /// Same distribution with every point multiplied by `factor > 0`.
    pub fn scaled(&self, factor: &S) -> Result<Self> {
        let support = self
            .support
            .iter()
            .map(|x| crate::vecops::scale(x, factor))
            .collect();
        Self::new(support, self.probs.clone())
    }

    /// Adds a type with probability zero.
    pub fn with_null_type(&self, x: Vec<S>) -> Result<Self> {
        let mut support = self.support.clone();
        let mut probs = self.probs.clone();
        support.push(x);
        probs.push(S::zero());
        Self::new(support, probs)
    }
}
