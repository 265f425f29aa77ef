//! Exact linear programming: `max c^T x` subject to row constraints and bounds.

use serde::{Deserialize, Serialize};

use super::simplex::{PrimalOutcome, Simplex};
use super::{LinalgError, PivotRule, RatMatrix, RatVector, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

/// Optional lower and upper bound of a variable.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: Option<Rational>,
    pub upper: Option<Rational>,
}

impl Bounds {
    pub fn free() -> Self {
        Bounds::default()
    }

    pub fn non_negative() -> Self {
        Bounds {
            lower: Some(Rational::zero()),
            upper: None,
        }
    }

    pub fn between(lower: Rational, upper: Rational) -> Self {
        Bounds {
            lower: Some(lower),
            upper: Some(upper),
        }
    }

    fn well_formed(&self) -> bool {
        match (&self.lower, &self.upper) {
            (Some(l), Some(u)) => l <= u,
            _ => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LpProblem {
    pub objective: RatVector,
    pub matrix: RatMatrix,
    pub senses: Vec<Sense>,
    pub rhs: RatVector,
    pub bounds: Vec<Bounds>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LpResult {
    Optimal {
        value: Rational,
        solution: RatVector,
    },
    /// `point` is feasible and `point + t * ray` stays feasible for all `t >= 0`
    /// while the objective grows without bound.
    Unbounded { point: RatVector, ray: RatVector },
    /// Row multipliers; see [`LpProblem::verify_farkas`].
    Infeasible { farkas: RatVector },
}

impl LpResult {
    pub fn optimal_value(&self) -> Option<&Rational> {
        match self {
            LpResult::Optimal { value, .. } => Some(value),
            _ => None,
        }
    }
}

impl LpProblem {
    pub fn new(
        objective: RatVector,
        matrix: RatMatrix,
        senses: Vec<Sense>,
        rhs: RatVector,
        bounds: Vec<Bounds>,
    ) -> Result<Self, LinalgError> {
        let lp = LpProblem {
            objective,
            matrix,
            senses,
            rhs,
            bounds,
        };
        lp.validate()?;
        Ok(lp)
    }

    pub fn num_vars(&self) -> usize {
        self.objective.dim()
    }

    pub fn num_rows(&self) -> usize {
        self.matrix.rows()
    }

    fn validate(&self) -> Result<(), LinalgError> {
        let n = self.objective.dim();
        let m = self.matrix.rows();
        if self.matrix.cols() != n {
            return Err(LinalgError::DimensionMismatch {
                expected: n,
                found: self.matrix.cols(),
            });
        }
        if self.bounds.len() != n {
            return Err(LinalgError::DimensionMismatch {
                expected: n,
                found: self.bounds.len(),
            });
        }
        for (len, what) in [(self.senses.len(), "senses"), (self.rhs.dim(), "rhs")] {
            if len != m {
                let _ = what;
                return Err(LinalgError::DimensionMismatch {
                    expected: m,
                    found: len,
                });
            }
        }
        if let Some(j) = self.bounds.iter().position(|b| !b.well_formed()) {
            return Err(LinalgError::MalformedBounds { var: j });
        }
        Ok(())
    }

    pub(crate) fn row_bounds(&self) -> Vec<(Option<Rational>, Option<Rational>)> {
        self.senses
            .iter()
            .zip(self.rhs.iter())
            .map(|(s, b)| match s {
                Sense::Le => (None, Some(b.clone())),
                Sense::Ge => (Some(b.clone()), None),
                Sense::Eq => (Some(b.clone()), Some(b.clone())),
            })
            .collect()
    }

    pub(crate) fn simplex(&self) -> Simplex {
        Simplex::new(
            self.matrix.to_rows(),
            self.row_bounds(),
            self.bounds
                .iter()
                .map(|b| (b.lower.clone(), b.upper.clone()))
                .collect(),
            self.objective.to_vec(),
        )
    }

    /// Exact feasibility check of a candidate point.
    pub fn is_feasible_point(&self, x: &[Rational]) -> bool {
        if x.len() != self.num_vars() {
            return false;
        }
        let in_bounds = self.bounds.iter().zip(x).all(|(b, v)| {
            b.lower.as_ref().is_none_or(|l| v >= l) && b.upper.as_ref().is_none_or(|u| v <= u)
        });
        in_bounds
            && (0..self.num_rows()).all(|i| {
                let act = super::matrix::dot(self.matrix.row(i), x);
                match self.senses[i] {
                    Sense::Le => act <= self.rhs[i],
                    Sense::Ge => act >= self.rhs[i],
                    Sense::Eq => act == self.rhs[i],
                }
            })
    }

    pub fn objective_value(&self, x: &[Rational]) -> Rational {
        super::matrix::dot(&self.objective, x)
    }

    /// Checks that `ray` is a recession direction with positive objective slope.
    pub fn verify_ray(&self, ray: &[Rational]) -> bool {
        if ray.len() != self.num_vars() || !self.objective_value(ray).is_positive() {
            return false;
        }
        let bounds_ok = self.bounds.iter().zip(ray).all(|(b, d)| {
            (b.lower.is_none() || !d.is_negative()) && (b.upper.is_none() || !d.is_positive())
        });
        bounds_ok
            && (0..self.num_rows()).all(|i| {
                let act = super::matrix::dot(self.matrix.row(i), ray);
                match self.senses[i] {
                    Sense::Le => !act.is_positive(),
                    Sense::Ge => !act.is_negative(),
                    Sense::Eq => act.is_zero(),
                }
            })
    }

    /// Verifies an infeasibility certificate. With row activities `s = A x`,
    /// the functional `y^T s - (A^T y)^T x` vanishes on every solution of the
    /// equality system; the certificate is valid if its minimum over the
    /// variable and row bounds is strictly positive.
    pub fn verify_farkas(&self, y: &[Rational]) -> bool {
        if y.len() != self.num_rows() {
            return false;
        }
        let n = self.num_vars();
        let mut w = vec![Rational::zero(); n];
        for (i, yi) in y.iter().enumerate() {
            if yi.is_zero() {
                continue;
            }
            for (wj, a) in w.iter_mut().zip(self.matrix.row(i)) {
                if !a.is_zero() {
                    *wj -= yi * a;
                }
            }
        }
        let row_bounds = self.row_bounds();
        let terms = w
            .iter()
            .zip(
                self.bounds
                    .iter()
                    .map(|b| (b.lower.as_ref(), b.upper.as_ref())),
            )
            .chain(
                y.iter()
                    .zip(row_bounds.iter().map(|(l, u)| (l.as_ref(), u.as_ref()))),
            );
        let mut total = Rational::zero();
        for (coef, (lo, hi)) in terms {
            if coef.is_zero() {
                continue;
            }
            let bound = if coef.is_positive() { lo } else { hi };
            match bound {
                Some(b) => total.add_mul(coef, b),
                None => return false,
            }
        }
        total.is_positive()
    }
}

/// Solves the LP exactly with Bland's rule.
pub fn lp_max(problem: &LpProblem) -> Result<LpResult, LinalgError> {
    lp_max_with(problem, PivotRule::Bland)
}

pub fn lp_max_with(problem: &LpProblem, rule: PivotRule) -> Result<LpResult, LinalgError> {
    problem.validate()?;
    let mut sx = problem.simplex();
    Ok(match sx.solve_primal(rule) {
        PrimalOutcome::Optimal => LpResult::Optimal {
            value: sx.objective_value(),
            solution: RatVector::new(sx.structural_values()),
        },
        PrimalOutcome::Unbounded { col, dir } => LpResult::Unbounded {
            point: RatVector::new(sx.structural_values()),
            ray: RatVector::new(sx.ray(col, dir)),
        },
        PrimalOutcome::Infeasible { farkas } => LpResult::Infeasible {
            farkas: RatVector::new(farkas),
        },
    })
}
