//! Affine pieces of an expression.

use std::collections::BTreeSet;

use super::{AffineTerm, CpwlExpr};
use crate::linalg::{lp_max, Bounds, LpProblem, RatMatrix, RatVector, Rational, Sense};

/// Whether the points where every chosen term is maximal in its summand
/// form a full-dimensional set. Decided by maximizing a margin `t <= 1`
/// with `(a_s - a_k)^T x - t >= b_k - b_s` for every rival `k`.
fn region_is_full(expr: &CpwlExpr, chosen: &[usize]) -> bool {
    let n = expr.dim();
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for ((_, m), &s) in expr.summands().iter().zip(chosen) {
        let sel = &m.terms()[s];
        for (k, t) in m.terms().iter().enumerate() {
            if k == s {
                continue;
            }
            let mut row: Vec<Rational> = sel.a.iter().zip(t.a.iter()).map(|(p, q)| p - q).collect();
            row.push(-Rational::one());
            rows.push(row);
            rhs.push(&t.b - &sel.b);
        }
    }
    if rows.is_empty() {
        return true;
    }
    let mut objective = vec![Rational::zero(); n + 1];
    objective[n] = Rational::one();
    let mut bounds = vec![Bounds::free(); n + 1];
    bounds[n].upper = Some(Rational::one());
    let m = rows.len();
    let lp = LpProblem::new(
        RatVector::new(objective),
        RatMatrix::from_rows(rows, n + 1).expect("rows have n + 1 entries"),
        vec![Sense::Ge; m],
        RatVector::new(rhs),
        bounds,
    )
    .expect("well-formed margin LP");
    let result = lp_max(&lp).expect("margin LP solves");
    result.optimal_value().is_some_and(Rational::is_positive)
}

/// The distinct affine functions that agree with `expr` on some
/// full-dimensional region, sorted.
///
/// Every choice of one active term per summand is tested with a margin LP;
/// choices are extended summand by summand and abandoned as soon as the
/// partial region is thin.
pub fn enumerate_pieces(expr: &CpwlExpr) -> Vec<AffineTerm> {
    let n = expr.dim();
    let mut found = BTreeSet::new();
    let mut chosen = Vec::new();
    extend(expr, &mut chosen, &mut found);
    if expr.is_zero() {
        found.insert(AffineTerm::constant(n, Rational::zero()));
    }
    found.into_iter().collect()
}

fn extend(expr: &CpwlExpr, chosen: &mut Vec<usize>, found: &mut BTreeSet<AffineTerm>) {
    let depth = chosen.len();
    let summands = expr.summands();
    if depth == summands.len() {
        if depth > 0 {
            let mut piece = AffineTerm::constant(expr.dim(), Rational::zero());
            for ((c, m), &s) in summands.iter().zip(chosen.iter()) {
                piece = piece.add(&m.terms()[s].scale(c));
            }
            found.insert(piece);
        }
        return;
    }
    for s in 0..summands[depth].1.len() {
        chosen.push(s);
        if region_is_full(&expr_prefix(expr, depth + 1), chosen) {
            extend(expr, chosen, found);
        }
        chosen.pop();
    }
}

fn expr_prefix(expr: &CpwlExpr, len: usize) -> CpwlExpr {
    if len == expr.summands().len() {
        return expr.clone();
    }
    CpwlExpr {
        dim: expr.dim(),
        summands: expr.summands()[..len].to_vec(),
    }
}
