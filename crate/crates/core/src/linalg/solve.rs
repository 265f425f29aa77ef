//! Exact Gaussian elimination and affine dependences.

use super::{LinalgError, RatMatrix, RatVector, Rational};

/// Outcome of [`solve_linear`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolveResult {
    Unique(RatVector),
    /// Every solution is `particular + span(kernel)`.
    Parametric {
        particular: RatVector,
        kernel: Vec<RatVector>,
    },
    Inconsistent,
}

struct Rref {
    /// Reduced rows (only the first `rank` are meaningful), columns in original order.
    rows: Vec<Vec<Rational>>,
    rhs: Vec<Rational>,
    /// `pivots[i]` is the original column of the pivot in row `i`.
    pivots: Vec<usize>,
}

/// Gauss-Jordan elimination with full pivoting. The pivot is the nonzero entry
/// of smallest "size" (cheap proxy: integer entries first) in the remaining block.
fn rref(a: &RatMatrix, b: Option<&[Rational]>) -> Rref {
    let m = a.rows();
    let n = a.cols();
    let mut rows = a.to_rows();
    let mut rhs: Vec<Rational> = match b {
        Some(b) => b.to_vec(),
        None => vec![Rational::zero(); m],
    };
    let mut used_col = vec![false; n];
    let mut pivots = Vec::new();
    let mut r = 0;
    while r < m {
        let mut best: Option<(usize, usize)> = None;
        'search: for (i, row) in rows.iter().enumerate().skip(r) {
            for (j, x) in row.iter().enumerate() {
                if used_col[j] || x.is_zero() {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((bi, bj)) => !rows[bi][bj].is_integer() && x.is_integer(),
                };
                if better {
                    best = Some((i, j));
                    if x.is_one() || (x.is_integer() && x.abs().is_one()) {
                        break 'search;
                    }
                }
            }
        }
        let Some((pi, pj)) = best else { break };
        rows.swap(r, pi);
        rhs.swap(r, pi);
        used_col[pj] = true;
        let inv = rows[r][pj].recip();
        for x in rows[r].iter_mut() {
            *x *= &inv;
        }
        rhs[r] *= &inv;
        let pivot_row = rows[r].clone();
        let pivot_rhs = rhs[r].clone();
        for i in 0..m {
            if i == r || rows[i][pj].is_zero() {
                continue;
            }
            let factor = rows[i][pj].clone();
            for (x, p) in rows[i].iter_mut().zip(&pivot_row) {
                if !p.is_zero() {
                    *x -= &factor * p;
                }
            }
            rhs[i] -= &factor * &pivot_rhs;
        }
        pivots.push(pj);
        r += 1;
    }
    Rref { rows, rhs, pivots }
}

/// Solves `A x = b` exactly.
pub fn solve_linear(a: &RatMatrix, b: &RatVector) -> Result<SolveResult, LinalgError> {
    if a.rows() != b.dim() {
        return Err(LinalgError::DimensionMismatch {
            expected: a.rows(),
            found: b.dim(),
        });
    }
    let n = a.cols();
    let red = rref(a, Some(b.as_slice()));
    let rank = red.pivots.len();
    if red.rhs[rank..].iter().any(|x| !x.is_zero()) {
        return Ok(SolveResult::Inconsistent);
    }
    let mut particular = vec![Rational::zero(); n];
    for (i, &p) in red.pivots.iter().enumerate() {
        particular[p] = red.rhs[i].clone();
    }
    let mut is_pivot = vec![false; n];
    for &p in &red.pivots {
        is_pivot[p] = true;
    }
    let kernel: Vec<RatVector> = (0..n)
        .filter(|&f| !is_pivot[f])
        .map(|f| {
            let mut k = vec![Rational::zero(); n];
            k[f] = Rational::one();
            for (i, &p) in red.pivots.iter().enumerate() {
                k[p] = -&red.rows[i][f];
            }
            RatVector::new(k)
        })
        .collect();
    if kernel.is_empty() {
        Ok(SolveResult::Unique(RatVector::new(particular)))
    } else {
        Ok(SolveResult::Parametric {
            particular: RatVector::new(particular),
            kernel,
        })
    }
}

pub fn rank(a: &RatMatrix) -> usize {
    rref(a, None).pivots.len()
}

/// An affine dependence `sum lambda_i p_i = 0`, `sum lambda_i = 0`, `lambda != 0`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AffineDependence {
    /// Indices into the input point list with nonzero coefficient, ascending.
    pub support: Vec<usize>,
    /// Coefficient for each entry of `support`.
    pub lambda: Vec<Rational>,
}

/// Finds an affine dependence among `points`, scanning them in order and
/// stopping at the first point that is affinely dependent on its predecessors.
/// The coefficients are scaled so that the first one in the support is `1`.
pub fn affine_dependence(points: &[RatVector]) -> Result<AffineDependence, LinalgError> {
    let Some(first) = points.first() else {
        return Err(LinalgError::NoAffineDependence);
    };
    let dim = first.dim();
    let count = points.len();
    // Each basis entry: (reduced lifted vector, pivot column, combination over inputs).
    let mut basis: Vec<(Vec<Rational>, usize, Vec<Rational>)> = Vec::new();
    for (k, p) in points.iter().enumerate() {
        if p.dim() != dim {
            return Err(LinalgError::DimensionMismatch {
                expected: dim,
                found: p.dim(),
            });
        }
        let mut v: Vec<Rational> = p.iter().cloned().collect();
        v.push(Rational::one());
        let mut combo = vec![Rational::zero(); count];
        combo[k] = Rational::one();
        for (bv, pivot, bc) in &basis {
            let coef = v[*pivot].clone();
            if coef.is_zero() {
                continue;
            }
            for (x, y) in v.iter_mut().zip(bv) {
                if !y.is_zero() {
                    *x -= &coef * y;
                }
            }
            for (x, y) in combo.iter_mut().zip(bc) {
                if !y.is_zero() {
                    *x -= &coef * y;
                }
            }
        }
        match v.iter().position(|x| !x.is_zero()) {
            None => {
                let (support, lambda): (Vec<usize>, Vec<Rational>) = combo
                    .into_iter()
                    .enumerate()
                    .filter(|(_, c)| !c.is_zero())
                    .unzip();
                let scale = lambda[0].recip();
                let lambda = lambda.into_iter().map(|c| c * &scale).collect();
                return Ok(AffineDependence { support, lambda });
            }
            Some(pivot) => {
                let inv = v[pivot].recip();
                for x in v.iter_mut() {
                    *x *= &inv;
                }
                for x in combo.iter_mut() {
                    *x *= &inv;
                }
                basis.push((v, pivot, combo));
            }
        }
    }
    Err(LinalgError::NoAffineDependence)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::rat;
    use proptest::prelude::*;

    fn check_solution(a: &RatMatrix, b: &RatVector, res: &SolveResult) {
        match res {
            SolveResult::Unique(x) => assert_eq!(&a.mul_vec(x).unwrap(), b),
            SolveResult::Parametric { particular, kernel } => {
                assert_eq!(&a.mul_vec(particular).unwrap(), b);
                for k in kernel {
                    assert!(a.mul_vec(k).unwrap().is_zero());
                }
            }
            SolveResult::Inconsistent => {}
        }
    }

    #[test]
    fn identity_system() {
        let a = RatMatrix::identity(2);
        let b = RatVector::from_ints(&[1, 2]);
        assert_eq!(
            solve_linear(&a, &b).unwrap(),
            SolveResult::Unique(RatVector::from_ints(&[1, 2]))
        );
    }

    #[test]
    fn underdetermined_system() {
        let a = RatMatrix::from_int_rows(&[&[1, 1]]);
        let b = RatVector::from_ints(&[0]);
        let res = solve_linear(&a, &b).unwrap();
        match &res {
            SolveResult::Parametric { kernel, .. } => {
                assert_eq!(kernel.len(), 1);
                let k = &kernel[0];
                // Spans the same line as (1, -1).
                assert_eq!(&k[0], &-&k[1]);
                assert!(!k[0].is_zero());
            }
            other => panic!("expected parametric, got {other:?}"),
        }
        check_solution(&a, &b, &res);
    }

    #[test]
    fn inconsistent_system() {
        let a = RatMatrix::from_int_rows(&[&[1, 2], &[2, 4]]);
        let b = RatVector::from_ints(&[1, 3]);
        assert_eq!(solve_linear(&a, &b).unwrap(), SolveResult::Inconsistent);
    }

    #[test]
    fn dimension_mismatch() {
        let a = RatMatrix::identity(2);
        let b = RatVector::from_ints(&[1, 2, 3]);
        assert!(matches!(
            solve_linear(&a, &b),
            Err(LinalgError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn dependence_on_a_line() {
        let pts: Vec<RatVector> = [0, 1, 2]
            .iter()
            .map(|&x| RatVector::from_ints(&[x]))
            .collect();
        let dep = affine_dependence(&pts).unwrap();
        assert_eq!(dep.support, vec![0, 1, 2]);
        assert_eq!(dep.lambda, vec![rat(1, 1), rat(-2, 1), rat(1, 1)]);
    }

    #[test]
    fn dependence_of_a_parallelogram() {
        let pts = vec![
            RatVector::from_ints(&[0, 0]),
            RatVector::from_ints(&[1, 0]),
            RatVector::from_ints(&[0, 1]),
            RatVector::from_ints(&[1, 1]),
        ];
        let dep = affine_dependence(&pts).unwrap();
        assert_eq!(dep.support, vec![0, 1, 2, 3]);
        assert_eq!(
            dep.lambda,
            vec![rat(1, 1), rat(-1, 1), rat(-1, 1), rat(1, 1)]
        );
    }

    #[test]
    fn dependence_on_duplicate_point() {
        // e1, e2, e3, e2 in R^3 (n + 1 = 4 points, two coincide) plus a fifth point.
        let pts = vec![
            RatVector::from_ints(&[1, 0, 0]),
            RatVector::from_ints(&[0, 1, 0]),
            RatVector::from_ints(&[0, 0, 1]),
            RatVector::from_ints(&[0, 1, 0]),
            RatVector::from_ints(&[5, 5, 5]),
        ];
        let dep = affine_dependence(&pts).unwrap();
        assert_eq!(dep.support, vec![1, 3]);
        assert_eq!(dep.lambda, vec![rat(1, 1), rat(-1, 1)]);
    }

    #[test]
    fn rank_of_singular_matrix() {
        let a = RatMatrix::from_int_rows(&[&[1, 2, 3], &[2, 4, 6], &[0, 1, 1]]);
        assert_eq!(a.rank(), 2);
    }

    fn small_rat() -> impl Strategy<Value = Rational> {
        (-6i64..=6, 1i64..=3).prop_map(|(n, d)| rat(n, d))
    }

    proptest! {
        #[test]
        fn solve_linear_solutions_satisfy_system(
            rows in 1usize..5, cols in 1usize..5,
            entries in prop::collection::vec(small_rat(), 25),
            rhs in prop::collection::vec(small_rat(), 5),
        ) {
            let data: Vec<Vec<Rational>> = (0..rows)
                .map(|i| entries[i * 5..i * 5 + cols].to_vec())
                .collect();
            let a = RatMatrix::from_rows(data, cols).unwrap();
            let b = RatVector::new(rhs[..rows].to_vec());
            let res = solve_linear(&a, &b).unwrap();
            check_solution(&a, &b, &res);
            if let SolveResult::Parametric { kernel, .. } = &res {
                prop_assert_eq!(kernel.len(), cols - a.rank());
            }
        }

        #[test]
        fn affine_dependence_is_valid(
            dim in 1usize..4,
            coords in prop::collection::vec(-3i64..=3, 24),
        ) {
            let pts: Vec<RatVector> = (0..dim + 2)
                .map(|i| RatVector::from_ints(&coords[i * dim..(i + 1) * dim]))
                .collect();
            let dep = affine_dependence(&pts).unwrap();
            prop_assert!(!dep.support.is_empty());
            prop_assert!(dep.support.len() <= dim + 2);
            let total: Rational = dep.lambda.iter().sum();
            prop_assert!(total.is_zero());
            let mut acc = RatVector::zeros(dim);
            for (&i, l) in dep.support.iter().zip(&dep.lambda) {
                prop_assert!(!l.is_zero());
                acc = acc.checked_add(&pts[i].scale(l)).unwrap();
            }
            prop_assert!(acc.is_zero());
        }
    }
}
