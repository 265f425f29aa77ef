//! Rewriting max terms into signed sums of smaller maxima.
//!
//! A max of `p > n + 1` affine terms on `R^n` always contains a Radon split
//! of its coefficient vectors. The split yields an identity between sums of
//! maxima over complements of even and odd subsets, which solves for the
//! full max in terms of strictly smaller ones. Iterating reaches maxima of at
//! most `n + 1` terms with integer coefficients.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cpwl::{AffineTerm, CpwlError, CpwlExpr, MaxTerm};
use crate::linalg::{affine_dependence, RatVector, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecomposeError {
    #[error("a Radon split needs more than {bound} terms, found {terms}")]
    TooFewTerms { terms: usize, bound: usize },
    #[error("convexification needs at least one piece")]
    NoPieces,
    #[error(transparent)]
    Expr(#[from] CpwlError),
}

/// Two disjoint index sets whose coefficient vectors share a convex
/// combination, with `sum weights_i b_i` no larger on `subset` than on `other`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RadonSplit {
    pub subset: Vec<usize>,
    pub weights: Vec<Rational>,
    pub other: Vec<usize>,
    pub other_weights: Vec<Rational>,
}

fn weighted_offset(term: &MaxTerm, idx: &[usize], w: &[Rational]) -> Rational {
    let mut acc = Rational::zero();
    for (i, l) in idx.iter().zip(w) {
        acc.add_mul(l, &term.terms()[*i].b);
    }
    acc
}

pub fn radon_subset(term: &MaxTerm) -> Result<RadonSplit, DecomposeError> {
    radon_subset_of(term, &(0..term.len()).collect::<Vec<_>>())
}

/// [`radon_subset`] restricted to the terms at `indices`; returned indices
/// refer to `term`.
fn radon_subset_of(term: &MaxTerm, indices: &[usize]) -> Result<RadonSplit, DecomposeError> {
    let n = term.dim();
    if indices.len() <= n + 1 {
        return Err(DecomposeError::TooFewTerms {
            terms: indices.len(),
            bound: n + 1,
        });
    }
    let points: Vec<RatVector> = indices.iter().map(|&i| term.terms()[i].a.clone()).collect();
    let dep = affine_dependence(&points).expect("more than n + 1 points are affinely dependent");
    let (mut pos, mut neg) = (Vec::new(), Vec::new());
    for (k, l) in dep.support.iter().zip(&dep.lambda) {
        if l.is_positive() {
            pos.push((indices[*k], l.clone()));
        } else if l.is_negative() {
            neg.push((indices[*k], -l));
        }
    }
    let normalize = |side: Vec<(usize, Rational)>| -> (Vec<usize>, Vec<Rational>) {
        let total: Rational = side.iter().map(|(_, l)| l).sum();
        side.into_iter().map(|(i, l)| (i, l / &total)).unzip()
    };
    let (a_idx, a_w) = normalize(pos);
    let (b_idx, b_w) = normalize(neg);
    let a_off = weighted_offset(term, &a_idx, &a_w);
    let b_off = weighted_offset(term, &b_idx, &b_w);
    let a_first = match a_off.cmp(&b_off) {
        std::cmp::Ordering::Less => true,
        std::cmp::Ordering::Greater => false,
        std::cmp::Ordering::Equal => (a_idx.len(), a_idx[0]) < (b_idx.len(), b_idx[0]),
    };
    Ok(if a_first {
        RadonSplit {
            subset: a_idx,
            weights: a_w,
            other: b_idx,
            other_weights: b_w,
        }
    } else {
        RadonSplit {
            subset: b_idx,
            weights: b_w,
            other: a_idx,
            other_weights: a_w,
        }
    })
}

/// Nonempty subsets `W` of `u` paired with the index set `indices \ W`,
/// split into even and odd `|W|`.
fn complements(indices: &[usize], u: &[usize]) -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
    let (mut even, mut odd) = (Vec::new(), Vec::new());
    for mask in 1u64..(1 << u.len()) {
        let w: Vec<usize> = (0..u.len())
            .filter(|k| mask >> k & 1 == 1)
            .map(|k| u[k])
            .collect();
        let rest: Vec<usize> = indices.iter().copied().filter(|i| !w.contains(i)).collect();
        if w.len().is_multiple_of(2) {
            even.push(rest);
        } else {
            odd.push(rest);
        }
    }
    (even, odd)
}

/// The two sides of the even/odd identity for `term`: maxima over
/// `[p] \ W` for even `|W|` (including `W` empty) and for odd `|W|`,
/// with `W` ranging over subsets of the Radon subset.
pub fn even_odd_sides(term: &MaxTerm) -> Result<(Vec<MaxTerm>, Vec<MaxTerm>), DecomposeError> {
    let split = radon_subset(term)?;
    let all: Vec<usize> = (0..term.len()).collect();
    let (even, odd) = complements(&all, &split.subset);
    let build = |sets: Vec<Vec<usize>>| -> Result<Vec<MaxTerm>, DecomposeError> {
        sets.iter().map(|s| Ok(term.subterm(s)?)).collect()
    };
    let mut even_terms = vec![term.clone()];
    even_terms.extend(build(even)?);
    Ok((even_terms, build(odd)?))
}

fn one_step_indices(
    term: &MaxTerm,
    indices: &[usize],
) -> Result<Vec<(Vec<usize>, i64)>, DecomposeError> {
    let split = radon_subset_of(term, indices)?;
    let (even, odd) = complements(indices, &split.subset);
    Ok(odd
        .into_iter()
        .map(|s| (s, 1))
        .chain(even.into_iter().map(|s| (s, -1)))
        .collect())
}

/// The full max as `sum_{odd W} max_{[p] \ W} - sum_{even W != {}} max_{[p] \ W}`.
pub fn one_step(term: &MaxTerm) -> Result<CpwlExpr, DecomposeError> {
    let all: Vec<usize> = (0..term.len()).collect();
    let summands = one_step_indices(term, &all)?
        .into_iter()
        .map(|(s, c)| Ok((Rational::from_int(c), term.subterm(&s)?)))
        .collect::<Result<Vec<_>, DecomposeError>>()?;
    Ok(CpwlExpr::new(term.dim(), summands)?)
}

/// Integer coefficients `c_S` over index subsets `S` of the input terms,
/// with `sum_S c_S max_S` equal to the input and every `|S| <= n + 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decomposition {
    pub term: MaxTerm,
    pub coefficients: BTreeMap<Vec<usize>, i64>,
    /// Number of Radon rewrites performed.
    pub steps: usize,
}

impl Decomposition {
    pub fn to_expr(&self) -> CpwlExpr {
        let summands = self
            .coefficients
            .iter()
            .map(|(s, c)| {
                (
                    Rational::from_int(*c),
                    self.term.subterm(s).expect("nonempty subset"),
                )
            })
            .collect();
        CpwlExpr::new(self.term.dim(), summands).expect("subterms share the dimension")
    }

    pub fn max_abs_coefficient(&self) -> i64 {
        self.coefficients
            .values()
            .map(|c| c.abs())
            .max()
            .unwrap_or(0)
    }
}

/// Repeats [`one_step`] on the largest remaining subset (lexicographically
/// first among equals) until every subset has at most `n + 1` terms.
pub fn decompose_max(term: &MaxTerm) -> Decomposition {
    decompose_max_to(term, term.dim() + 1).expect("n + 1 is always reachable")
}

/// [`decompose_max`] stopping once every subset has at most `bound` terms.
pub fn decompose_max_to(term: &MaxTerm, bound: usize) -> Result<Decomposition, DecomposeError> {
    if bound <= term.dim() {
        return Err(DecomposeError::TooFewTerms {
            terms: bound,
            bound: term.dim() + 1,
        });
    }
    let mut coefficients: BTreeMap<Vec<usize>, i64> = BTreeMap::new();
    coefficients.insert((0..term.len()).collect(), 1);
    let mut steps = 0;
    loop {
        let next = coefficients
            .iter()
            .filter(|(s, _)| s.len() > bound)
            .min_by(|(s, _), (t, _)| t.len().cmp(&s.len()).then_with(|| s.cmp(t)))
            .map(|(s, c)| (s.clone(), *c));
        let Some((s, c)) = next else { break };
        coefficients.remove(&s);
        for (sub, d) in one_step_indices(term, &s).expect("subset exceeds n + 1 terms") {
            let e = coefficients.entry(sub).or_insert(0);
            *e += c * d;
        }
        coefficients.retain(|_, c| *c != 0);
        steps += 1;
    }
    Ok(Decomposition {
        term: term.clone(),
        coefficients,
        steps,
    })
}

/// `term` as an integer combination of maxima of at most `n + 1` of its
/// own terms.
pub fn reduce_to_nplus1(term: &MaxTerm) -> CpwlExpr {
    decompose_max(term).to_expr()
}

/// Replaces every summand by its reduction.
pub fn reduce_expr(expr: &CpwlExpr) -> CpwlExpr {
    expr.summands()
        .iter()
        .fold(CpwlExpr::zero(expr.dim()), |acc, (c, m)| {
            acc.add(&reduce_to_nplus1(m).scale(c))
                .expect("same dimension")
        })
}

/// `f = g - h` with `h` the sum of pairwise maxima of the pieces and
/// `g = f + h`; both are convex when `pieces` covers the pieces of `f`.
pub fn convexify(
    f: &CpwlExpr,
    pieces: &[AffineTerm],
) -> Result<(CpwlExpr, CpwlExpr), DecomposeError> {
    if pieces.is_empty() {
        return Err(DecomposeError::NoPieces);
    }
    let mut summands = Vec::new();
    for i in 0..pieces.len() {
        for j in i + 1..pieces.len() {
            let m = MaxTerm::new(vec![pieces[i].clone(), pieces[j].clone()])?;
            summands.push((Rational::one(), m));
        }
    }
    let h = CpwlExpr::new(f.dim(), summands)?;
    let g = f.add(&h)?;
    Ok((g, h))
}

/// Positive summands and negated negative summands.
pub fn split_by_sign(f: &CpwlExpr) -> (CpwlExpr, CpwlExpr) {
    let (pos, neg): (Vec<_>, Vec<_>) = f
        .summands()
        .iter()
        .cloned()
        .partition(|(c, _)| c.is_positive());
    let neg = neg.into_iter().map(|(c, m)| (-c, m)).collect();
    (
        CpwlExpr::new(f.dim(), pos).expect("same dimension"),
        CpwlExpr::new(f.dim(), neg).expect("same dimension"),
    )
}

/// Per-summand record of a decomposition with one-based term indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SidecarEntry {
    pub summand: usize,
    pub coefficient: Rational,
    pub terms: Vec<String>,
    pub subsets: Vec<SubsetCoefficient>,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetCoefficient {
    #[serde(rename = "S")]
    pub subset: Vec<usize>,
    pub c: i64,
}

/// Reduces every summand to maxima of at most `bound` terms (`n + 1` when
/// `None`) and records the subset coefficients. Summands already within the
/// bound appear with the single full subset.
pub fn decompose_expr(
    expr: &CpwlExpr,
    bound: Option<usize>,
) -> Result<(CpwlExpr, Vec<SidecarEntry>), DecomposeError> {
    let bound = bound.unwrap_or(expr.dim() + 1);
    let mut sidecar = Vec::new();
    let mut out = CpwlExpr::zero(expr.dim());
    for (j, (c, m)) in expr.summands().iter().enumerate() {
        let d = decompose_max_to(m, bound)?;
        out = out.add(&d.to_expr().scale(c)).expect("same dimension");
        sidecar.push(SidecarEntry {
            summand: j + 1,
            coefficient: c.clone(),
            terms: m.terms().iter().map(ToString::to_string).collect(),
            subsets: d
                .coefficients
                .iter()
                .map(|(s, c)| SubsetCoefficient {
                    subset: s.iter().map(|i| i + 1).collect(),
                    c: *c,
                })
                .collect(),
            steps: d.steps,
        });
    }
    Ok((out, sidecar))
}
