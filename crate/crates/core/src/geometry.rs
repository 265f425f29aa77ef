//! Newton polytopes in vertex representation.
//!
//! A convex max-affine function corresponds to the convex hull of its
//! coefficient vectors. Sums of functions become Minkowski sums and maxima
//! become hulls of unions. An extended set lives in `R^{n+1}` with offsets in
//! the last coordinate and carries the recession ray `-e_{n+1}` implicitly.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compile::ReluNetwork;
use crate::cpwl::MaxTerm;
use crate::linalg::{lp_max, Bounds, LpProblem, LpResult, RatMatrix, RatVector, Rational, Sense};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GeometryError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("cannot combine an extended set with a plain one")]
    ExtendedMismatch,
    #[error("an extended set needs dimension at least 2")]
    ExtendedTooSmall,
    #[error("a point set must be nonempty")]
    Empty,
    #[error("the max term has nonzero offsets")]
    NotHomogeneous,
    #[error("the network has a nonzero bias")]
    NonzeroBias,
}

/// A finite, sorted, duplicate-free set of points.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct PointSet {
    dim: usize,
    extended: bool,
    points: Vec<RatVector>,
}

/// A support function value; extended sets are unbounded in directions
/// with negative last coordinate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Support {
    Value(Rational),
    Unbounded,
}

impl Support {
    pub fn value(&self) -> Option<&Rational> {
        match self {
            Support::Value(v) => Some(v),
            Support::Unbounded => None,
        }
    }
}

impl PointSet {
    pub fn new(
        dim: usize,
        extended: bool,
        mut points: Vec<RatVector>,
    ) -> Result<Self, GeometryError> {
        if points.is_empty() {
            return Err(GeometryError::Empty);
        }
        if extended && dim < 2 {
            return Err(GeometryError::ExtendedTooSmall);
        }
        if let Some(p) = points.iter().find(|p| p.dim() != dim) {
            return Err(GeometryError::DimensionMismatch {
                expected: dim,
                found: p.dim(),
            });
        }
        points.sort();
        points.dedup();
        Ok(PointSet {
            dim,
            extended,
            points,
        })
    }

    pub fn singleton(point: RatVector) -> Self {
        PointSet {
            dim: point.dim(),
            extended: false,
            points: vec![point],
        }
    }

    pub fn origin(dim: usize) -> Self {
        PointSet::singleton(RatVector::zeros(dim))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_extended(&self) -> bool {
        self.extended
    }

    pub fn points(&self) -> &[RatVector] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `c P` for `c >= 0`.
    pub fn scale(&self, c: &Rational) -> PointSet {
        assert!(!c.is_negative(), "scaling factor must be nonnegative");
        let points = if c.is_zero() {
            vec![RatVector::zeros(self.dim)]
        } else {
            self.points.iter().map(|p| p.scale(c)).collect()
        };
        PointSet {
            dim: self.dim,
            extended: self.extended,
            points,
        }
    }

    fn compatible(&self, other: &PointSet) -> Result<(), GeometryError> {
        if self.dim != other.dim {
            return Err(GeometryError::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        if self.extended != other.extended {
            return Err(GeometryError::ExtendedMismatch);
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("point set serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

impl<'de> Deserialize<'de> for PointSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            dim: usize,
            extended: bool,
            points: Vec<RatVector>,
        }
        let raw = Raw::deserialize(d)?;
        PointSet::new(raw.dim, raw.extended, raw.points).map_err(serde::de::Error::custom)
    }
}

/// Coefficient vectors of `term`, with offsets appended when `extended`.
pub fn newton_of(term: &MaxTerm, extended: bool) -> Result<PointSet, GeometryError> {
    if extended {
        let points = term.terms().iter().map(|t| t.lifted()).collect();
        return PointSet::new(term.dim() + 1, true, points);
    }
    if !term.is_homogeneous() {
        return Err(GeometryError::NotHomogeneous);
    }
    PointSet::new(
        term.dim(),
        false,
        term.terms().iter().map(|t| t.a.clone()).collect(),
    )
}

pub fn support_eval(p: &PointSet, c: &RatVector) -> Result<Support, GeometryError> {
    if c.dim() != p.dim {
        return Err(GeometryError::DimensionMismatch {
            expected: p.dim,
            found: c.dim(),
        });
    }
    if p.extended && c[p.dim - 1].is_negative() {
        return Ok(Support::Unbounded);
    }
    let best = p
        .points
        .iter()
        .map(|q| crate::linalg::RatVector::dot(q, c).expect("dimensions checked"))
        .max()
        .expect("nonempty");
    Ok(Support::Value(best))
}

pub fn minkowski_sum(p: &PointSet, q: &PointSet) -> Result<PointSet, GeometryError> {
    p.compatible(q)?;
    let mut sums = BTreeSet::new();
    for a in &p.points {
        for b in &q.points {
            sums.insert(a.checked_add(b).expect("same dimension"));
        }
    }
    Ok(prune_vertices(&PointSet {
        dim: p.dim,
        extended: p.extended,
        points: sums.into_iter().collect(),
    }))
}

pub fn conv_union(p: &PointSet, q: &PointSet) -> Result<PointSet, GeometryError> {
    p.compatible(q)?;
    let points: BTreeSet<RatVector> = p.points.iter().chain(&q.points).cloned().collect();
    Ok(prune_vertices(&PointSet {
        dim: p.dim,
        extended: p.extended,
        points: points.into_iter().collect(),
    }))
}

/// Whether `v` lies in the hull of `others` (plus the downward ray when
/// `extended`): `sum l_i q_i - m e_last = v`, `sum l_i = 1`, `l, m >= 0`.
fn is_redundant(v: &RatVector, others: &[&RatVector], extended: bool) -> bool {
    if others.is_empty() {
        return false;
    }
    let dim = v.dim();
    let k = others.len();
    let nvars = k + usize::from(extended);
    let mut rows = Vec::with_capacity(dim + 1);
    for r in 0..dim {
        let mut row: Vec<Rational> = others.iter().map(|q| q[r].clone()).collect();
        if extended {
            row.push(if r == dim - 1 {
                -Rational::one()
            } else {
                Rational::zero()
            });
        }
        rows.push(row);
    }
    let mut ones = vec![Rational::one(); k];
    if extended {
        ones.push(Rational::zero());
    }
    rows.push(ones);
    let mut rhs = v.to_vec();
    rhs.push(Rational::one());
    let lp = LpProblem::new(
        RatVector::zeros(nvars),
        RatMatrix::from_rows(rows, nvars).expect("consistent rows"),
        vec![Sense::Eq; dim + 1],
        RatVector::new(rhs),
        vec![Bounds::non_negative(); nvars],
    )
    .expect("well-formed hull LP");
    matches!(
        lp_max(&lp).expect("hull LP solves"),
        LpResult::Optimal { .. }
    )
}

/// The vertex set: every point in the hull of the remaining ones is dropped.
pub fn prune_vertices(p: &PointSet) -> PointSet {
    let mut keep: Vec<bool> = vec![true; p.points.len()];
    for i in 0..p.points.len() {
        let others: Vec<&RatVector> = (0..p.points.len())
            .filter(|&j| j != i && keep[j])
            .map(|j| &p.points[j])
            .collect();
        if is_redundant(&p.points[i], &others, p.extended) {
            keep[i] = false;
        }
    }
    let mut points: Vec<RatVector> = p
        .points
        .iter()
        .zip(keep)
        .filter(|(_, k)| *k)
        .map(|(q, _)| q.clone())
        .collect();
    points.sort();
    PointSet {
        dim: p.dim,
        extended: p.extended,
        points,
    }
}

/// Invariance under reflection through the vertex centroid.
pub fn check_central_symmetry(p: &PointSet) -> bool {
    let count = Rational::from_int(p.points.len() as i64);
    let centroid: Vec<Rational> = (0..p.dim)
        .map(|r| p.points.iter().map(|q| &q[r]).sum::<Rational>() / &count)
        .collect();
    let two = Rational::from_int(2);
    let reflected: BTreeSet<RatVector> = p
        .points
        .iter()
        .map(|q| q.iter().zip(&centroid).map(|(x, c)| c * &two - x).collect())
        .collect();
    reflected.into_iter().eq(p.points.iter().cloned())
}

/// A convex positively homogeneous function `g - h` as its polytope pair.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Pair {
    p: PointSet,
    q: PointSet,
}

/// `sum_j w_j (p_j - q_j)` regrouped into nonnegative combinations.
fn combine(weights: &[Rational], inputs: &[Pair], dim: usize) -> Pair {
    let mut p = PointSet::origin(dim);
    let mut q = PointSet::origin(dim);
    for (w, pair) in weights.iter().zip(inputs) {
        if w.is_zero() {
            continue;
        }
        let (to_p, to_q) = if w.is_positive() {
            (&pair.p, &pair.q)
        } else {
            (&pair.q, &pair.p)
        };
        let c = w.abs();
        p = minkowski_sum(&p, &to_p.scale(&c)).expect("same dimension");
        q = minkowski_sum(&q, &to_q.scale(&c)).expect("same dimension");
    }
    Pair { p, q }
}

/// Polytopes `P`, `Q` with `f(x) = max_{p in P} p^T x - max_{q in Q} q^T x`
/// for the function `f` of a bias-free network.
///
/// Inputs start as `({e_i}, {0})`. A neuron receiving `g - h` outputs
/// `max{0, g - h} = max{g, h} - h`, i.e. `(conv(P_g, P_h), P_h)`, and weighted
/// sums regroup positive and negative weights into Minkowski sums.
pub fn newton_pair_of_network(net: &ReluNetwork) -> Result<(PointSet, PointSet), GeometryError> {
    if !net.is_bias_free() {
        return Err(GeometryError::NonzeroBias);
    }
    let n = net.input_dim();
    let mut units: Vec<Pair> = (0..n)
        .map(|i| Pair {
            p: PointSet::singleton(RatVector::unit(n, i)),
            q: PointSet::origin(n),
        })
        .collect();
    for layer in net.layers() {
        units = (0..layer.width())
            .map(|i| {
                let pre = combine(layer.weights.row(i), &units, n);
                Pair {
                    p: conv_union(&pre.p, &pre.q).expect("same dimension"),
                    q: pre.q,
                }
            })
            .collect();
    }
    let out = combine(net.output(), &units, n);
    Ok((out.p, out.q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compile::{compile_expr, homogenize, Layer};
    use crate::cpwl::{sample_point, AffineTerm, CpwlExpr};
    use crate::linalg::rat;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn set(dim: usize, extended: bool, pts: &[&[i64]]) -> PointSet {
        PointSet::new(
            dim,
            extended,
            pts.iter().map(|p| RatVector::from_ints(p)).collect(),
        )
        .unwrap()
    }

    fn square() -> PointSet {
        set(2, false, &[&[0, 0], &[1, 0], &[0, 1], &[1, 1]])
    }

    fn simplex2() -> PointSet {
        set(2, false, &[&[0, 0], &[1, 0], &[0, 1]])
    }

    fn value(s: Support) -> Rational {
        s.value().cloned().expect("bounded")
    }

    #[test]
    fn newton_of_examples() {
        let m = MaxTerm::max_of_coordinates(3, true);
        let p = newton_of(&m, false).unwrap();
        assert_eq!(
            p,
            set(3, false, &[&[0, 0, 0], &[1, 0, 0], &[0, 1, 0], &[0, 0, 1]])
        );
        let t = MaxTerm::single(AffineTerm::from_ints(&[2, -1], 5));
        assert_eq!(newton_of(&t, true).unwrap(), set(3, true, &[&[2, -1, 5]]));
        assert_eq!(newton_of(&t, false), Err(GeometryError::NotHomogeneous));
        let dup = MaxTerm::new(vec![
            AffineTerm::coordinate(1, 0),
            AffineTerm::coordinate(1, 0),
        ])
        .unwrap();
        assert_eq!(newton_of(&dup, false).unwrap().len(), 1);
    }

    #[test]
    fn support_examples() {
        let seg = set(2, false, &[&[0, 0], &[1, 0]]);
        assert_eq!(
            value(support_eval(&seg, &RatVector::from_ints(&[3, 4])).unwrap()),
            Rational::from_int(3)
        );
        let ext = set(2, true, &[&[0, 0], &[1, 0]]);
        assert_eq!(
            support_eval(&ext, &RatVector::from_ints(&[1, -1])).unwrap(),
            Support::Unbounded
        );
        assert_eq!(
            value(support_eval(&simplex2(), &RatVector::from_ints(&[1, 1])).unwrap()),
            Rational::one()
        );
    }

    #[test]
    fn minkowski_examples() {
        let a = set(2, false, &[&[0, 0], &[1, 0]]);
        let b = set(2, false, &[&[0, 0], &[0, 1]]);
        assert_eq!(minkowski_sum(&a, &b).unwrap(), square());
        let t = set(2, false, &[&[3, -2]]);
        let moved = minkowski_sum(&simplex2(), &t).unwrap();
        assert_eq!(moved, set(2, false, &[&[3, -2], &[4, -2], &[3, -1]]));
        let double = minkowski_sum(&simplex2(), &simplex2()).unwrap();
        assert_eq!(double, set(2, false, &[&[0, 0], &[2, 0], &[0, 2]]));
        assert_eq!(
            minkowski_sum(&a, &set(2, true, &[&[0, 0]])),
            Err(GeometryError::ExtendedMismatch)
        );
    }

    #[test]
    fn union_examples() {
        let o = set(1, false, &[&[0]]);
        let e = set(1, false, &[&[1]]);
        assert_eq!(conv_union(&o, &e).unwrap(), set(1, false, &[&[0], &[1]]));
        let mid =
            PointSet::new(2, false, vec![RatVector::new(vec![rat(1, 2), rat(1, 2)])]).unwrap();
        assert_eq!(conv_union(&simplex2(), &mid).unwrap(), simplex2());
        assert_eq!(
            conv_union(&square(), &square()).unwrap(),
            prune_vertices(&square())
        );
    }

    #[test]
    fn prune_examples() {
        let p = PointSet::new(
            2,
            false,
            vec![
                RatVector::from_ints(&[0, 0]),
                RatVector::from_ints(&[1, 0]),
                RatVector::new(vec![rat(1, 2), rat(0, 1)]),
            ],
        )
        .unwrap();
        assert_eq!(prune_vertices(&p), set(2, false, &[&[0, 0], &[1, 0]]));
        assert_eq!(
            prune_vertices(&set(2, true, &[&[0, 0], &[0, -1]])),
            set(2, true, &[&[0, 0]])
        );
        let mut pts = square().points().to_vec();
        pts.push(RatVector::new(vec![rat(1, 2), rat(1, 2)]));
        assert_eq!(
            prune_vertices(&PointSet::new(2, false, pts).unwrap()),
            square()
        );
    }

    #[test]
    fn symmetry_examples() {
        assert!(check_central_symmetry(&square()));
        assert!(!check_central_symmetry(&simplex2()));
        assert!(check_central_symmetry(&set(3, false, &[&[1, 2, 3]])));
    }

    #[test]
    fn json_round_trip() {
        let p = set(3, true, &[&[1, 2, 3], &[0, 0, 0]]);
        let back = PointSet::from_json(&p.to_json()).unwrap();
        assert_eq!(back, p);
        assert!(PointSet::from_json(r#"{"dim": 1, "extended": true, "points": [["1"]]}"#).is_err());
    }

    fn relu_net(w: i64) -> ReluNetwork {
        let l = Layer {
            weights: RatMatrix::from_int_rows(&[&[1]]),
            bias: RatVector::zeros(1),
        };
        ReluNetwork::new(1, vec![l], RatVector::from_ints(&[w]), Rational::zero()).unwrap()
    }

    #[test]
    fn single_relu_pair() {
        let (p, q) = newton_pair_of_network(&relu_net(1)).unwrap();
        assert_eq!(p, set(1, false, &[&[0], &[1]]));
        assert_eq!(q, set(1, false, &[&[0]]));
        let (p, q) = newton_pair_of_network(&relu_net(-1)).unwrap();
        assert_eq!(p, set(1, false, &[&[0]]));
        assert_eq!(q, set(1, false, &[&[0], &[1]]));
    }

    fn check_pair(net: &ReluNetwork, samples: usize, seed: u64) {
        let (p, q) = newton_pair_of_network(net).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..samples {
            let x = sample_point(&mut rng, net.input_dim());
            let diff = value(support_eval(&p, &x).unwrap()) - value(support_eval(&q, &x).unwrap());
            assert_eq!(diff, net.eval(&x).unwrap());
        }
    }

    #[test]
    fn fig1_pair_reproduces_max() {
        let net = homogenize(&compile_expr(&crate::cpwl::tests::fig1()));
        check_pair(&net, 50, 0);
        let biased = compile_expr(&"max(x1, 1)".parse().unwrap());
        assert_eq!(
            newton_pair_of_network(&biased),
            Err(GeometryError::NonzeroBias)
        );
    }

    #[test]
    fn one_layer_pairs_are_zonotopes() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..10 {
            let n = rng.gen_range(1..=3);
            let width = rng.gen_range(1..=4);
            let rows: Vec<Vec<Rational>> = (0..width)
                .map(|_| {
                    (0..n)
                        .map(|_| Rational::from_int(rng.gen_range(-3..=3)))
                        .collect()
                })
                .collect();
            let l = Layer {
                weights: RatMatrix::from_rows(rows, n).unwrap(),
                bias: RatVector::zeros(width),
            };
            let out = (0..width)
                .map(|_| Rational::from_int(rng.gen_range(-2..=2)))
                .collect();
            let net = ReluNetwork::new(n, vec![l], out, Rational::zero()).unwrap();
            check_pair(&net, 30, 1);
            let (p, q) = newton_pair_of_network(&net).unwrap();
            assert!(check_central_symmetry(&p));
            assert!(check_central_symmetry(&q));
        }
    }

    #[test]
    fn extended_support_matches_function() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a: CpwlExpr = "max(x1 - 1, 2*x2 + 1/2, 0)".parse().unwrap();
        let b: CpwlExpr = "max(x1 + x2, -x1 + 3)".parse().unwrap();
        let (ma, mb) = (&a.summands()[0].1, &b.summands()[0].1);
        let na = newton_of(ma, true).unwrap();
        let nb = newton_of(mb, true).unwrap();
        let sum = minkowski_sum(&na, &nb).unwrap();
        let hull = conv_union(&na, &nb).unwrap();
        for _ in 0..100 {
            let x = sample_point(&mut rng, 2);
            let c = x.extended(Rational::one());
            let (fa, fb) = (a.eval(&x).unwrap(), b.eval(&x).unwrap());
            assert_eq!(value(support_eval(&sum, &c).unwrap()), &fa + &fb);
            assert_eq!(value(support_eval(&hull, &c).unwrap()), fa.max(fb));
        }
    }

    fn arb_points() -> impl proptest::strategy::Strategy<Value = Vec<Vec<i64>>> {
        use proptest::prelude::*;
        prop::collection::vec(prop::collection::vec(-3i64..=3, 2), 1..9)
    }

    fn arb_max(n: usize) -> impl proptest::strategy::Strategy<Value = MaxTerm> {
        use proptest::prelude::*;
        prop::collection::vec((prop::collection::vec(-3i64..=3, n), -3i64..=3), 1..6).prop_map(
            |ts| {
                MaxTerm::new(
                    ts.into_iter()
                        .map(|(a, b)| AffineTerm::from_ints(&a, b))
                        .collect(),
                )
                .unwrap()
            },
        )
    }

    proptest::proptest! {
        #[test]
        fn prune_is_idempotent_and_order_free(pts in arb_points(), extended in proptest::bool::ANY, seed in 0u64..100) {
            let vs: Vec<RatVector> = pts.iter().map(|p| RatVector::from_ints(p)).collect();
            let p = PointSet::new(2, extended, vs.clone()).unwrap();
            let once = prune_vertices(&p);
            proptest::prop_assert_eq!(prune_vertices(&once), once.clone());
            let mut shuffled = vs;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for i in (1..shuffled.len()).rev() {
                shuffled.swap(i, rng.gen_range(0..=i));
            }
            let q = PointSet { dim: 2, extended, points: shuffled };
            proptest::prop_assert_eq!(prune_vertices(&q), once.clone());
            for c in [[1, 0], [0, 1], [-1, 2], [2, -1], [-1, -1]] {
                let c = RatVector::from_ints(&c);
                proptest::prop_assert_eq!(support_eval(&p, &c).unwrap(), support_eval(&once, &c).unwrap());
            }
        }

        #[test]
        fn semiring_isomorphism(f in arb_max(3), g in arb_max(3), xs in proptest::collection::vec(proptest::collection::vec(-50i64..50, 3), 100)) {
            let nf = newton_of(&f, true).unwrap();
            let ng = newton_of(&g, true).unwrap();
            let sum = minkowski_sum(&nf, &ng).unwrap();
            let hull = conv_union(&nf, &ng).unwrap();
            for x in xs {
                let x: RatVector = x.iter().map(|&v| rat(v, 7)).collect();
                let c = x.extended(Rational::one());
                let (a, b) = (f.eval(&x).unwrap(), g.eval(&x).unwrap());
                proptest::prop_assert_eq!(value(support_eval(&sum, &c).unwrap()), &a + &b);
                proptest::prop_assert_eq!(value(support_eval(&hull, &c).unwrap()), a.max(b));
            }
        }
    }
}
