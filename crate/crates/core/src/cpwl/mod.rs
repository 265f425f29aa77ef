//! Linear combinations of max-affine terms.
//!
//! Every continuous piecewise-linear function on `R^n` is a rational linear
//! combination of maxima of at most `n + 1` affine functions, so
//! [`CpwlExpr`] is the single input format used by the decomposition,
//! compilation and geometry modules.

mod parse;
mod pieces;

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{RatVector, Rational};

pub use parse::parse_expr;
pub use pieces::enumerate_pieces;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CpwlError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("a max term needs at least one affine term")]
    EmptyMax,
    #[error("{line}:{col}: {message}")]
    Parse {
        line: usize,
        col: usize,
        message: String,
    },
}

fn check_dim(expected: usize, found: usize) -> Result<(), CpwlError> {
    if expected == found {
        Ok(())
    } else {
        Err(CpwlError::DimensionMismatch { expected, found })
    }
}

/// `x -> a^T x + b`. Ordered lexicographically by `(a, b)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AffineTerm {
    pub a: RatVector,
    pub b: Rational,
}

impl AffineTerm {
    pub fn new(a: RatVector, b: Rational) -> Self {
        AffineTerm { a, b }
    }

    pub fn linear(a: RatVector) -> Self {
        AffineTerm {
            a,
            b: Rational::zero(),
        }
    }

    pub fn constant(dim: usize, b: Rational) -> Self {
        AffineTerm {
            a: RatVector::zeros(dim),
            b,
        }
    }

    /// The coordinate function `x_i` (zero-based `i`).
    pub fn coordinate(dim: usize, i: usize) -> Self {
        AffineTerm::linear(RatVector::unit(dim, i))
    }

    pub fn from_ints(a: &[i64], b: i64) -> Self {
        AffineTerm::new(RatVector::from_ints(a), Rational::from_int(b))
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    pub fn is_linear(&self) -> bool {
        self.b.is_zero()
    }

    pub fn eval(&self, x: &RatVector) -> Result<Rational, CpwlError> {
        check_dim(self.dim(), x.dim())?;
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: &[Rational]) -> Rational {
        let mut acc = self.b.clone();
        for (a, v) in self.a.iter().zip(x) {
            if !a.is_zero() {
                acc.add_mul(a, v);
            }
        }
        acc
    }

    pub fn add(&self, other: &AffineTerm) -> AffineTerm {
        let a = self
            .a
            .iter()
            .zip(other.a.iter())
            .map(|(p, q)| p + q)
            .collect();
        AffineTerm::new(a, &self.b + &other.b)
    }

    pub fn scale(&self, c: &Rational) -> AffineTerm {
        AffineTerm::new(self.a.scale(c), &self.b * c)
    }

    /// Coefficient vector followed by the offset, a point in `R^{n+1}`.
    pub fn lifted(&self) -> RatVector {
        self.a.extended(self.b.clone())
    }
}

impl fmt::Display for AffineTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = self
            .a
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(i, c)| format!("{c}*x{}", i + 1))
            .collect();
        if !self.b.is_zero() || parts.is_empty() {
            parts.push(self.b.to_string());
        }
        f.write_str(&parts.join(" + "))
    }
}

/// `max` of a nonempty set of affine terms, kept sorted and duplicate-free.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct MaxTerm {
    terms: Vec<AffineTerm>,
}

impl MaxTerm {
    pub fn new(mut terms: Vec<AffineTerm>) -> Result<Self, CpwlError> {
        let Some(first) = terms.first() else {
            return Err(CpwlError::EmptyMax);
        };
        let dim = first.dim();
        for t in &terms {
            check_dim(dim, t.dim())?;
        }
        terms.sort();
        terms.dedup();
        Ok(MaxTerm { terms })
    }

    pub fn single(term: AffineTerm) -> Self {
        MaxTerm { terms: vec![term] }
    }

    /// `max{0, x_1, ..., x_n}` when `with_zero`, else `max{x_1, ..., x_n}`.
    pub fn max_of_coordinates(dim: usize, with_zero: bool) -> Self {
        let mut terms: Vec<AffineTerm> = (0..dim).map(|i| AffineTerm::coordinate(dim, i)).collect();
        if with_zero {
            terms.push(AffineTerm::constant(dim, Rational::zero()));
        }
        MaxTerm::new(terms).expect("nonempty")
    }

    pub fn terms(&self) -> &[AffineTerm] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.terms[0].dim()
    }

    pub fn is_homogeneous(&self) -> bool {
        self.terms.iter().all(AffineTerm::is_linear)
    }

    /// The max over the terms at the given positions.
    pub fn subterm(&self, indices: &[usize]) -> Result<MaxTerm, CpwlError> {
        MaxTerm::new(indices.iter().map(|&i| self.terms[i].clone()).collect())
    }

    pub fn eval(&self, x: &RatVector) -> Result<Rational, CpwlError> {
        check_dim(self.dim(), x.dim())?;
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: &[Rational]) -> Rational {
        self.terms
            .iter()
            .map(|t| t.eval_unchecked(x))
            .max()
            .expect("nonempty")
    }

    /// Position of a maximizing term at `x` (the first one on ties).
    pub fn argmax(&self, x: &[Rational]) -> usize {
        let mut best = 0;
        let mut best_val = self.terms[0].eval_unchecked(x);
        for (i, t) in self.terms.iter().enumerate().skip(1) {
            let v = t.eval_unchecked(x);
            if v > best_val {
                best = i;
                best_val = v;
            }
        }
        best
    }
}

impl<'de> Deserialize<'de> for MaxTerm {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            terms: Vec<AffineTerm>,
        }
        let raw = Raw::deserialize(d)?;
        MaxTerm::new(raw.terms).map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for MaxTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("max(")?;
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{t}")?;
        }
        f.write_str(")")
    }
}

/// `sum_j c_j * max_j` over `R^dim`. Summands are sorted by max term, merged
/// when equal, and zero coefficients are dropped.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct CpwlExpr {
    dim: usize,
    summands: Vec<(Rational, MaxTerm)>,
}

impl CpwlExpr {
    pub fn new(dim: usize, summands: Vec<(Rational, MaxTerm)>) -> Result<Self, CpwlError> {
        for (_, m) in &summands {
            check_dim(dim, m.dim())?;
        }
        Ok(CpwlExpr { dim, summands }.canonicalize())
    }

    pub fn zero(dim: usize) -> Self {
        CpwlExpr {
            dim,
            summands: Vec::new(),
        }
    }

    pub fn from_max(term: MaxTerm) -> Self {
        CpwlExpr {
            dim: term.dim(),
            summands: vec![(Rational::one(), term)],
        }
    }

    pub fn from_affine(term: AffineTerm) -> Self {
        CpwlExpr::from_max(MaxTerm::single(term))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn summands(&self) -> &[(Rational, MaxTerm)] {
        &self.summands
    }

    pub fn is_zero(&self) -> bool {
        self.summands.is_empty()
    }

    /// Largest number of affine terms in any summand (0 for the empty sum).
    pub fn max_term_count(&self) -> usize {
        self.summands
            .iter()
            .map(|(_, m)| m.len())
            .max()
            .unwrap_or(0)
    }

    pub fn is_homogeneous(&self) -> bool {
        self.summands.iter().all(|(_, m)| m.is_homogeneous())
    }

    /// All coefficients positive, which makes the function convex.
    pub fn is_convex_form(&self) -> bool {
        self.summands.iter().all(|(c, _)| c.is_positive())
    }

    pub fn canonicalize(&self) -> CpwlExpr {
        let mut merged: BTreeMap<MaxTerm, Rational> = BTreeMap::new();
        for (c, m) in &self.summands {
            *merged.entry(m.clone()).or_default() += c;
        }
        CpwlExpr {
            dim: self.dim,
            summands: merged
                .into_iter()
                .filter(|(_, c)| !c.is_zero())
                .map(|(m, c)| (c, m))
                .collect(),
        }
    }

    pub fn eval(&self, x: &RatVector) -> Result<Rational, CpwlError> {
        check_dim(self.dim, x.dim())?;
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: &[Rational]) -> Rational {
        let mut acc = Rational::zero();
        for (c, m) in &self.summands {
            acc.add_mul(c, &m.eval_unchecked(x));
        }
        acc
    }

    pub fn add(&self, other: &CpwlExpr) -> Result<CpwlExpr, CpwlError> {
        check_dim(self.dim, other.dim)?;
        let mut summands = self.summands.clone();
        summands.extend(other.summands.iter().cloned());
        Ok(CpwlExpr {
            dim: self.dim,
            summands,
        }
        .canonicalize())
    }

    pub fn scale(&self, c: &Rational) -> CpwlExpr {
        CpwlExpr {
            dim: self.dim,
            summands: self
                .summands
                .iter()
                .map(|(d, m)| (d * c, m.clone()))
                .collect(),
        }
        .canonicalize()
    }

    pub fn neg(&self) -> CpwlExpr {
        self.scale(&-Rational::one())
    }

    pub fn sub(&self, other: &CpwlExpr) -> Result<CpwlExpr, CpwlError> {
        self.add(&other.neg())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("expression serializes")
    }

    pub fn from_json(s: &str) -> Result<CpwlExpr, serde_json::Error> {
        serde_json::from_str(s)
    }
}

impl<'de> Deserialize<'de> for CpwlExpr {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            dim: usize,
            summands: Vec<(Rational, MaxTerm)>,
        }
        let raw = Raw::deserialize(d)?;
        CpwlExpr::new(raw.dim, raw.summands).map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for CpwlExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.summands.is_empty() {
            return f.write_str("0");
        }
        for (i, (c, m)) in self.summands.iter().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            write!(f, "{c}*{m}")?;
        }
        Ok(())
    }
}

impl std::str::FromStr for CpwlExpr {
    type Err = CpwlError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_expr(s, None)
    }
}

/// A rational with numerator uniform in `[-10^4, 10^4]` over denominator `10^3`.
pub fn sample_rational<R: Rng>(rng: &mut R) -> Rational {
    Rational::new(rng.gen_range(-10_000..=10_000), 1000)
}

pub fn sample_point<R: Rng>(rng: &mut R, dim: usize) -> RatVector {
    (0..dim).map(|_| sample_rational(rng)).collect()
}

/// `count` seeded sample points.
pub fn sample_points(dim: usize, count: usize, seed: u64) -> Vec<RatVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| sample_point(&mut rng, dim)).collect()
}

/// A pair `(x, y)` whose midpoint value exceeds the average of the endpoint
/// values, searched over `trials` seeded random pairs.
pub fn find_convexity_violation(
    expr: &CpwlExpr,
    trials: usize,
    seed: u64,
) -> Option<(RatVector, RatVector)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = Rational::new(1, 2);
    for _ in 0..trials {
        let x = sample_point(&mut rng, expr.dim());
        let y = sample_point(&mut rng, expr.dim());
        let m: Vec<Rational> = x
            .iter()
            .zip(y.iter())
            .map(|(p, q)| (p + q) * &half)
            .collect();
        let avg = (expr.eval_unchecked(&x) + expr.eval_unchecked(&y)) * &half;
        if expr.eval_unchecked(&m) > avg {
            return Some((x, y));
        }
    }
    None
}

/// Midpoint convexity on random pairs. A `false` answer is always correct;
/// `true` only means no violation was sampled.
pub fn check_convex_sampled(expr: &CpwlExpr, trials: usize, seed: u64) -> bool {
    find_convexity_violation(expr, trials, seed).is_none()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::linalg::rat;
    use proptest::prelude::*;

    pub(crate) fn fig1() -> CpwlExpr {
        "1*max(0, 1*x1 + -1*x2) + 1*max(0, 1*x2) + -1*max(0, -1*x2)"
            .parse()
            .unwrap()
    }

    fn relu_x1(c: i64) -> CpwlExpr {
        CpwlExpr::from_max(MaxTerm::max_of_coordinates(1, true)).scale(&Rational::from_int(c))
    }

    #[test]
    fn fig1_value() {
        assert_eq!(
            fig1().eval(&RatVector::from_ints(&[3, 5])).unwrap(),
            Rational::from_int(5)
        );
    }

    #[test]
    fn empty_sum_is_zero() {
        let e = CpwlExpr::zero(3);
        assert_eq!(
            e.eval(&RatVector::from_ints(&[1, 2, 3])).unwrap(),
            Rational::zero()
        );
        assert_eq!(e.to_string(), "0");
    }

    #[test]
    fn all_negative_inputs() {
        let e = CpwlExpr::from_max(MaxTerm::max_of_coordinates(4, true));
        let x = RatVector::from_ints(&[-1, -2, -3, -4]);
        assert_eq!(e.eval(&x).unwrap(), Rational::zero());
    }

    #[test]
    fn dimension_mismatch() {
        let e = fig1();
        assert_eq!(
            e.eval(&RatVector::from_ints(&[1])),
            Err(CpwlError::DimensionMismatch {
                expected: 2,
                found: 1
            })
        );
        assert_eq!(
            MaxTerm::new(vec![
                AffineTerm::from_ints(&[1], 0),
                AffineTerm::from_ints(&[1, 2], 0)
            ]),
            Err(CpwlError::DimensionMismatch {
                expected: 1,
                found: 2
            })
        );
        assert_eq!(MaxTerm::new(vec![]), Err(CpwlError::EmptyMax));
    }

    #[test]
    fn duplicates_and_zero_coefficients() {
        let m = MaxTerm::new(vec![
            AffineTerm::from_ints(&[1], 0),
            AffineTerm::from_ints(&[0], 0),
            AffineTerm::from_ints(&[1], 0),
        ])
        .unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.terms()[0], AffineTerm::from_ints(&[0], 0));
        let e = CpwlExpr::new(1, vec![(rat(1, 2), m.clone()), (rat(-1, 2), m.clone())]).unwrap();
        assert!(e.is_zero());
        let e = CpwlExpr::new(1, vec![(rat(1, 2), m.clone()), (rat(1, 3), m)]).unwrap();
        assert_eq!(e.summands().len(), 1);
        assert_eq!(e.summands()[0].0, rat(5, 6));
    }

    #[test]
    fn display_format() {
        let e: CpwlExpr = "3/2*max(0, 1*x1 + -1*x2 + 1/2) + -1*max(1*x2)"
            .parse()
            .unwrap();
        assert_eq!(
            e.to_string(),
            "3/2*max(0, 1*x1 + -1*x2 + 1/2) + -1*max(1*x2)"
        );
        assert_eq!(e.to_string().parse::<CpwlExpr>().unwrap(), e);
    }

    #[test]
    fn json_round_trip() {
        let e = fig1();
        assert_eq!(CpwlExpr::from_json(&e.to_json()).unwrap(), e);
        let bad = r#"{"dim": 2, "summands": [["1", {"terms": [{"a": ["1"], "b": "0"}]}]]}"#;
        assert!(CpwlExpr::from_json(bad).is_err());
    }

    #[test]
    fn convexity_sampling() {
        for seed in 0..5 {
            assert!(check_convex_sampled(&relu_x1(1), 200, seed));
        }
        let (x, y) = find_convexity_violation(&relu_x1(-1), 200, 0).expect("concave kink");
        assert!(x[0].signum() * y[0].signum() < 0);
        assert!(check_convex_sampled(&fig1(), 500, 1));
    }

    #[test]
    fn relu_convexified_sum_is_convex() {
        // f = relu(x) - relu(-x) = x; pairwise-max sum over its pieces {x, -x, 0} keeps it convex.
        let f: CpwlExpr = "1*max(0, 1*x1) + -1*max(0, -1*x1)".parse().unwrap();
        let h: CpwlExpr = "1*max(1*x1, -1*x1)".parse().unwrap();
        let g = f.add(&h).unwrap();
        assert!(check_convex_sampled(&g, 2000, 7));
        let grid: Vec<RatVector> = (-20..=20)
            .map(|i| RatVector::new(vec![rat(i, 4)]))
            .collect();
        let half = rat(1, 2);
        for x in &grid {
            for y in &grid {
                let m = RatVector::new(vec![(&x[0] + &y[0]) * &half]);
                let avg = (g.eval(x).unwrap() + g.eval(y).unwrap()) * &half;
                assert!(g.eval(&m).unwrap() <= avg);
            }
        }
    }

    fn arb_affine(dim: usize, homogeneous: bool) -> impl Strategy<Value = AffineTerm> {
        (prop::collection::vec(-5i64..=5, dim), -5i64..=5)
            .prop_map(move |(a, b)| AffineTerm::from_ints(&a, if homogeneous { 0 } else { b }))
    }

    pub(crate) fn arb_expr(dim: usize, homogeneous: bool) -> impl Strategy<Value = CpwlExpr> {
        prop::collection::vec(
            (
                -3i64..=3,
                prop::collection::vec(arb_affine(dim, homogeneous), 1..4),
            ),
            0..4,
        )
        .prop_map(move |s| {
            let summands = s
                .into_iter()
                .map(|(c, t)| (Rational::from_int(c), MaxTerm::new(t).unwrap()))
                .collect();
            CpwlExpr::new(dim, summands).unwrap()
        })
    }

    proptest! {
        #[test]
        fn positively_homogeneous(e in arb_expr(3, true), lam in 0i64..50, x in prop::collection::vec(-20i64..20, 3)) {
            let x = RatVector::from_ints(&x);
            let lam = rat(lam, 7);
            let lx = x.scale(&lam);
            prop_assert_eq!(e.eval(&lx).unwrap(), &lam * &e.eval(&x).unwrap());
        }

        #[test]
        fn canonicalize_is_idempotent(e in arb_expr(2, false)) {
            let once = e.canonicalize();
            prop_assert_eq!(once.canonicalize(), once.clone());
            prop_assert_eq!(once, e);
        }

        #[test]
        fn text_round_trip(e in arb_expr(3, false)) {
            let back = parse_expr(&e.to_string(), Some(3)).unwrap();
            prop_assert_eq!(back, e);
        }

        #[test]
        fn single_max_piece_count(t in prop::collection::vec(arb_affine(2, false), 1..6)) {
            let p = t.len();
            let e = CpwlExpr::from_max(MaxTerm::new(t).unwrap());
            prop_assert!(enumerate_pieces(&e).len() <= p);
        }
    }
}
