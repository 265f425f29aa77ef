//! Mixed-integer model of one second-layer neuron.

use serde::{Deserialize, Serialize};

use super::{BasisTable, RaySet};
use crate::linalg::{Bounds, LinalgError, LpProblem, RatMatrix, RatVector, Rational, Sense};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VarKind {
    Binary,
    Continuous,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MipVariable {
    pub name: String,
    pub kind: VarKind,
    pub lower: Option<Rational>,
    pub upper: Option<Rational>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MipConstraint {
    pub name: String,
    /// Sparse `(variable index, coefficient)` list.
    pub coefs: Vec<(usize, Rational)>,
    pub sense: Sense,
    pub rhs: Rational,
}

/// `maximize objective^T x` over the constraints, with binaries in `{0, 1}`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MipModel {
    pub name: String,
    pub variables: Vec<MipVariable>,
    pub constraints: Vec<MipConstraint>,
    pub objective: Vec<(usize, Rational)>,
}

impl MipModel {
    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn num_binary(&self) -> usize {
        self.variables
            .iter()
            .filter(|v| v.kind == VarKind::Binary)
            .count()
    }

    pub fn num_continuous(&self) -> usize {
        self.variables
            .iter()
            .filter(|v| v.kind == VarKind::Continuous)
            .count()
    }

    pub fn num_inequalities(&self) -> usize {
        self.constraints
            .iter()
            .filter(|c| c.sense != Sense::Eq)
            .count()
    }

    pub fn binary_indices(&self) -> Vec<usize> {
        (0..self.num_vars())
            .filter(|&j| self.variables[j].kind == VarKind::Binary)
            .collect()
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    /// Checks that every referenced variable exists and bounds are ordered.
    pub fn validate(&self) -> Result<(), LinalgError> {
        let n = self.num_vars();
        let refs = self
            .objective
            .iter()
            .chain(self.constraints.iter().flat_map(|c| c.coefs.iter()));
        for (j, _) in refs {
            if *j >= n {
                return Err(LinalgError::DimensionMismatch {
                    expected: n,
                    found: j + 1,
                });
            }
        }
        for (j, v) in self.variables.iter().enumerate() {
            if let (Some(l), Some(u)) = (&v.lower, &v.upper) {
                if l > u {
                    return Err(LinalgError::MalformedBounds { var: j });
                }
            }
        }
        Ok(())
    }

    /// Bounds with binaries relaxed to `[0, 1]`.
    pub fn relaxed_bounds(&self) -> Vec<Bounds> {
        self.variables
            .iter()
            .map(|v| match v.kind {
                VarKind::Continuous => Bounds {
                    lower: v.lower.clone(),
                    upper: v.upper.clone(),
                },
                VarKind::Binary => Bounds {
                    lower: Some(
                        v.lower
                            .clone()
                            .unwrap_or_else(Rational::zero)
                            .max(Rational::zero()),
                    ),
                    upper: Some(
                        v.upper
                            .clone()
                            .unwrap_or_else(Rational::one)
                            .min(Rational::one()),
                    ),
                },
            })
            .collect()
    }

    pub fn lp_relaxation(&self) -> Result<LpProblem, LinalgError> {
        self.validate()?;
        let n = self.num_vars();
        let mut objective = vec![Rational::zero(); n];
        for (j, c) in &self.objective {
            objective[*j] += c;
        }
        let rows = self
            .constraints
            .iter()
            .map(|c| {
                let mut row = vec![Rational::zero(); n];
                for (j, a) in &c.coefs {
                    row[*j] += a;
                }
                row
            })
            .collect();
        LpProblem::new(
            RatVector::new(objective),
            RatMatrix::from_rows(rows, n)?,
            self.constraints.iter().map(|c| c.sense).collect(),
            self.constraints.iter().map(|c| c.rhs.clone()).collect(),
            self.relaxed_bounds(),
        )
    }

    pub fn objective_value(&self, x: &[Rational]) -> Rational {
        let mut acc = Rational::zero();
        for (j, c) in &self.objective {
            acc.add_mul(c, &x[*j]);
        }
        acc
    }

    /// Exact feasibility including integrality.
    pub fn is_feasible(&self, x: &[Rational]) -> bool {
        if x.len() != self.num_vars() {
            return false;
        }
        let vars_ok = self.variables.iter().zip(x).all(|(v, val)| {
            v.lower.as_ref().is_none_or(|l| val >= l)
                && v.upper.as_ref().is_none_or(|u| val <= u)
                && (v.kind == VarKind::Continuous || val.is_zero() || val.is_one())
        });
        vars_ok
            && self.constraints.iter().all(|c| {
                let mut act = Rational::zero();
                for (j, a) in &c.coefs {
                    act.add_mul(a, &x[*j]);
                }
                match c.sense {
                    Sense::Le => act <= c.rhs,
                    Sense::Ge => act >= c.rhs,
                    Sense::Eq => act == c.rhs,
                }
            })
    }
}

fn row(name: usize, coefs: Vec<(usize, Rational)>, sense: Sense, rhs: i64) -> MipConstraint {
    let mut coefs: Vec<(usize, Rational)> =
        coefs.into_iter().filter(|(_, a)| !a.is_zero()).collect();
    coefs.sort_by_key(|(j, _)| *j);
    MipConstraint {
        name: format!("R{name:03}"),
        coefs,
        sense,
        rhs: Rational::from_int(rhs),
    }
}

/// Builds the neuron model over the arrangement of `table`, where the
/// incoming function is `sum_k a_k g_{functions[inputs[k]]}` with every
/// `a_k in [-1, 1]`. The indicator constant is `inputs.len() + 1`, one more
/// than the largest possible activation on a ray.
pub fn build_mip_for(table: &BasisTable, inputs: &[usize], name: &str) -> MipModel {
    let rays: &RaySet = &table.rays;
    let big_m = inputs.len() as i64 + 1;
    let m_rat = Rational::from_int(big_m);
    let mut variables = Vec::new();
    for &k in inputs {
        variables.push(MipVariable {
            name: format!("a{}", table.functions[k].digits()),
            kind: VarKind::Continuous,
            lower: Some(-Rational::one()),
            upper: Some(Rational::one()),
        });
    }
    let z0 = variables.len();
    for s in rays.subsets() {
        variables.push(MipVariable {
            name: format!("z{}", s.digits()),
            kind: VarKind::Binary,
            lower: Some(Rational::zero()),
            upper: Some(Rational::one()),
        });
    }
    let y0 = variables.len();
    for s in rays.subsets() {
        variables.push(MipVariable {
            name: format!("y{}", s.digits()),
            kind: VarKind::Continuous,
            lower: None,
            upper: None,
        });
    }
    let activation = |i: usize, scale: i64| -> Vec<(usize, Rational)> {
        inputs
            .iter()
            .enumerate()
            .map(|(k, &f)| (k, &table.values[(f, i)] * &Rational::from_int(scale)))
            .collect()
    };
    let mut constraints = Vec::new();
    let mut next = 1;
    let mut push = |coefs, sense, rhs| {
        constraints.push(row(next, coefs, sense, rhs));
        next += 1;
    };
    let one = Rational::one;
    for i in 0..rays.len() {
        let (z, y) = (z0 + i, y0 + i);
        push(vec![(y, one())], Sense::Ge, 0);
        let mut c = activation(i, -1);
        c.push((y, one()));
        push(c, Sense::Ge, 0);
        push(vec![(y, one()), (z, -&m_rat)], Sense::Le, 0);
        let mut c = activation(i, -1);
        c.push((y, one()));
        c.push((z, m_rat.clone()));
        push(c, Sense::Le, big_m);
    }
    for (i, j) in rays.nested_pairs() {
        let mut c = activation(i, 1);
        c.push((z0 + j, -&m_rat));
        push(c, Sense::Ge, -big_m);
        let mut c = activation(j, 1);
        c.push((z0 + i, -&m_rat));
        push(c, Sense::Ge, -big_m);
    }
    let objective = rays
        .signs()
        .into_iter()
        .enumerate()
        .map(|(i, s)| (y0 + i, s))
        .collect();
    MipModel {
        name: name.to_string(),
        variables,
        constraints,
        objective,
    }
}

/// The neuron model in `R^4`: 14 coefficients over `g_M` with `|M| <= 2`,
/// 30 indicators and 30 outputs.
pub fn build_mip() -> MipModel {
    let table = BasisTable::new(4);
    build_mip_for(&table, &table.small, "MAX5")
}

/// The same construction in `R^2` with linear incoming functions only
/// (`g_{1}` and `g_{2}`), i.e. a one-hidden-layer network.
pub fn build_mip_analog_2d() -> MipModel {
    let table = BasisTable::new(2);
    let inputs: Vec<usize> = (0..table.functions.len())
        .filter(|&k| table.functions[k].len() == 1)
        .collect();
    build_mip_for(&table, &inputs, "MAX3")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_shape() {
        let m = build_mip();
        assert_eq!(m.num_binary(), 30);
        assert_eq!(m.num_continuous(), 44);
        assert_eq!(m.constraints.len(), 420);
        assert_eq!(m.num_inequalities(), 420);
        m.validate().unwrap();
    }

    #[test]
    fn activation_coefficients_are_unit() {
        let m = build_mip();
        for c in &m.constraints {
            for (j, a) in &c.coefs {
                if *j < 14 {
                    assert!(a.abs() <= Rational::one());
                }
            }
        }
    }

    #[test]
    fn indicator_constant_is_fifteen() {
        let m = build_mip();
        let z = m.var_index("z0").unwrap();
        let c = &m.constraints[2];
        assert_eq!(
            c.coefs.iter().find(|(j, _)| *j == z).unwrap().1,
            Rational::from_int(-15)
        );
        assert_eq!(m.constraints[3].rhs, Rational::from_int(15));
    }

    #[test]
    fn analog_shape() {
        let m = build_mip_analog_2d();
        assert_eq!(m.num_binary(), 6);
        assert_eq!(m.num_continuous(), 8);
        assert_eq!(m.constraints.len(), 24 + 12);
        assert_eq!(m.variables[0].name, "a1");
        assert_eq!(m.variables[1].name, "a2");
    }

    #[test]
    fn zero_neuron_is_feasible() {
        for m in [build_mip(), build_mip_analog_2d()] {
            let x = vec![Rational::zero(); m.num_vars()];
            assert!(m.is_feasible(&x));
            assert_eq!(m.objective_value(&x), Rational::zero());
        }
    }
}
