//! Depth certificate for `max{0, x1, x2, x3, x4}` under H-conformity.
//!
//! `H` is the arrangement of the hyperplanes `x_i = x_j` for `0 <= i < j <= d`
//! with `x_0 = 0`. An H-conforming function is fixed by its values on the
//! rays `r_S`, one per nonempty proper subset `S` of `{0, ..., d}`. The
//! functions `g_M(x) = max_{i in M} x_i` form a basis of that space, and the
//! signed sum `phi` separates the top basis function from the rest. The MIP
//! searches for a second-layer neuron with positive `phi`.

mod bnb;
mod mip;
mod mps;
mod verify;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{RatMatrix, RatVector, Rational};

pub use bnb::{
    solve_mip, solve_mip_with, BoundRecord, Branching, Checkpoint, MipError, MipSolution,
    MipStatus, NodeSelection, OpenNode, SolverConfig,
};
pub use mip::{
    build_mip, build_mip_analog_2d, build_mip_for, MipConstraint, MipModel, MipVariable, VarKind,
};
pub use mps::{emit_mps, parse_mps, MpsError};
pub use verify::{
    brute_force_optimum, decode, reflect_solution, solution_from_coefficients, solve_and_verify,
    DecodedNeuron, Reflected,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DepthgateError {
    #[error("no value given for subset {0}")]
    MissingSubset(Subset),
    #[error("value given for subset {0}, which has no ray")]
    UnknownSubset(Subset),
    #[error("model column `{0}` does not follow the a/z/y naming scheme")]
    UnrecognizedColumn(String),
    #[error("solution has {found} entries, model has {expected} variables")]
    SolutionLength { expected: usize, found: usize },
    #[error("decoded solution is inconsistent: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Solver(#[from] MipError),
}

/// A subset of `{0, ..., 7}` stored as a bitmask.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Subset(u8);

impl Subset {
    pub fn from_bits(bits: u8) -> Self {
        Subset(bits)
    }

    pub fn from_elements(elements: &[usize]) -> Self {
        Subset(elements.iter().fold(0u8, |acc, &i| acc | (1 << i)))
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, i: usize) -> bool {
        self.0 & (1 << i) != 0
    }

    pub fn elements(self) -> Vec<usize> {
        (0..8).filter(|&i| self.contains(i)).collect()
    }

    pub fn is_proper_subset_of(self, other: Subset) -> bool {
        self != other && self.0 & other.0 == self.0
    }

    /// The subset's digits in increasing order, e.g. `023`.
    pub fn digits(self) -> String {
        self.elements().iter().map(|i| i.to_string()).collect()
    }

    /// Parses the digit form produced by [`Subset::digits`].
    pub fn parse_digits(s: &str) -> Option<Subset> {
        let mut bits = 0u8;
        for ch in s.chars() {
            let d = ch.to_digit(10)? as usize;
            if d >= 8 || bits & (1 << d) != 0 {
                return None;
            }
            bits |= 1 << d;
        }
        Some(Subset(bits))
    }
}

impl Ord for Subset {
    /// Size first, then lexicographic on the sorted elements.
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.len()
            .cmp(&other.len())
            .then_with(|| self.elements().cmp(&other.elements()))
    }
}

impl PartialOrd for Subset {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.elements().iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

impl fmt::Debug for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// All subsets of `{0, ..., d}` accepted by `keep`, in size-then-lex order.
fn subsets_of(d: usize, keep: impl Fn(Subset) -> bool) -> Vec<Subset> {
    let mut out: Vec<Subset> = (0u16..1 << (d + 1))
        .map(|b| Subset(b as u8))
        .filter(|&s| keep(s))
        .collect();
    out.sort();
    out
}

/// The ray generators `r_S` of the arrangement in `R^d`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RaySet {
    dim: usize,
    subsets: Vec<Subset>,
    rays: Vec<RatVector>,
}

impl RaySet {
    /// `d` is the ambient dimension; the ground set is `{0, ..., d}`.
    pub fn new(d: usize) -> Self {
        assert!((1..=6).contains(&d), "ground set must fit in a byte");
        let full = Subset((1u16 << (d + 1)).wrapping_sub(1) as u8);
        let subsets = subsets_of(d, |s| !s.is_empty() && s != full);
        let rays = subsets
            .iter()
            .map(|&s| {
                (1..=d)
                    .map(|i| {
                        if s.contains(0) {
                            Rational::from_int(i64::from(!s.contains(i)))
                        } else {
                            -Rational::from_int(i64::from(s.contains(i)))
                        }
                    })
                    .collect()
            })
            .collect();
        RaySet {
            dim: d,
            subsets,
            rays,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.subsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsets.is_empty()
    }

    pub fn subsets(&self) -> &[Subset] {
        &self.subsets
    }

    pub fn rays(&self) -> &[RatVector] {
        &self.rays
    }

    pub fn full_set(&self) -> Subset {
        Subset((1u16 << (self.dim + 1)).wrapping_sub(1) as u8)
    }

    pub fn index_of(&self, s: Subset) -> Option<usize> {
        self.subsets.binary_search(&s).ok()
    }

    pub fn ray(&self, s: Subset) -> Option<&RatVector> {
        self.index_of(s).map(|i| &self.rays[i])
    }

    /// The complement of `s` in the ground set; its ray is `-r_S`.
    pub fn antipode(&self, s: Subset) -> Subset {
        Subset(self.full_set().0 & !s.0)
    }

    /// All pairs `(S, S')` with `S` a proper subset of `S'`, as ray indices.
    pub fn nested_pairs(&self) -> Vec<(usize, usize)> {
        let mut pairs = Vec::new();
        for (i, &s) in self.subsets.iter().enumerate() {
            for (j, &t) in self.subsets.iter().enumerate() {
                if s.is_proper_subset_of(t) {
                    pairs.push((i, j));
                }
            }
        }
        pairs
    }

    /// `(-1)^{|S|}` per ray.
    pub fn signs(&self) -> Vec<Rational> {
        self.subsets
            .iter()
            .map(|s| Rational::from_int(if s.len() % 2 == 0 { 1 } else { -1 }))
            .collect()
    }

    /// Orders a subset-keyed value map along the rays.
    pub fn values_in_order(
        &self,
        values: &BTreeMap<Subset, Rational>,
    ) -> Result<Vec<Rational>, DepthgateError> {
        if let Some(&s) = values.keys().find(|&&s| self.index_of(s).is_none()) {
            return Err(DepthgateError::UnknownSubset(s));
        }
        self.subsets
            .iter()
            .map(|&s| {
                values
                    .get(&s)
                    .cloned()
                    .ok_or(DepthgateError::MissingSubset(s))
            })
            .collect()
    }
}

/// The 30 rays of the arrangement in `R^4`.
pub fn rays() -> RaySet {
    RaySet::new(4)
}

/// `g_M(x) = max_{i in M} x_i` with `x_0 = 0`.
pub fn eval_g(m: Subset, x: &[Rational]) -> Rational {
    m.elements()
        .into_iter()
        .map(|i| {
            if i == 0 {
                Rational::zero()
            } else {
                x[i - 1].clone()
            }
        })
        .reduce(Rational::max)
        .expect("g_M needs a nonempty M")
}

/// Values of the basis functions `g_M` on all rays.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasisTable {
    pub rays: RaySet,
    /// The index sets `M`, in size-then-lex order; the full set is last.
    pub functions: Vec<Subset>,
    /// `values[(k, i)] = g_{functions[k]}(r_{subsets[i]})`.
    pub values: RatMatrix,
    /// Indices into `functions` with `|M| <= 2`.
    pub small: Vec<usize>,
    /// Indices into `functions` of everything except the full set.
    pub all_but_top: Vec<usize>,
}

impl BasisTable {
    pub fn new(d: usize) -> Self {
        let rays = RaySet::new(d);
        let zero_only = Subset(1);
        let functions = subsets_of(d, |s| !s.is_empty() && s != zero_only);
        let rows: Vec<Vec<Rational>> = functions
            .iter()
            .map(|&m| rays.rays().iter().map(|r| eval_g(m, r)).collect())
            .collect();
        let values = RatMatrix::from_rows(rows, rays.len()).expect("rectangular table");
        let small = (0..functions.len())
            .filter(|&k| functions[k].len() <= 2)
            .collect();
        let full = rays.full_set();
        let all_but_top = (0..functions.len())
            .filter(|&k| functions[k] != full)
            .collect();
        BasisTable {
            rays,
            functions,
            values,
            small,
            all_but_top,
        }
    }

    /// The values of `g_{functions[k]}` keyed by subset.
    pub fn column(&self, k: usize) -> BTreeMap<Subset, Rational> {
        self.rays
            .subsets()
            .iter()
            .copied()
            .zip(self.values.row(k).iter().cloned())
            .collect()
    }

    pub fn top(&self) -> usize {
        self.functions.len() - 1
    }

    pub fn rank(&self) -> usize {
        self.values.rank()
    }

    /// Aligned text rendering: one line per function, one column per ray.
    pub fn render(&self) -> String {
        let width = self
            .rays
            .subsets()
            .iter()
            .map(|s| s.digits().len())
            .max()
            .unwrap_or(1)
            .max(2);
        let label = self
            .functions
            .iter()
            .map(|m| m.digits().len())
            .max()
            .unwrap_or(1)
            + 2;
        let mut out = format!("{:label$}", "");
        for s in self.rays.subsets() {
            out.push_str(&format!(" {:>width$}", s.digits()));
        }
        out.push('\n');
        for (k, m) in self.functions.iter().enumerate() {
            out.push_str(&format!("{:<label$}", format!("g{}", m.digits())));
            for v in self.values.row(k) {
                out.push_str(&format!(" {:>width$}", v.to_string()));
            }
            out.push('\n');
        }
        out
    }
}

/// The 30 x 30 table for the arrangement in `R^4`.
pub fn basis_table() -> BasisTable {
    let table = BasisTable::new(4);
    assert_eq!(
        table.rank(),
        table.functions.len(),
        "basis functions must be independent"
    );
    table
}

/// `phi(g) = sum_S (-1)^{|S|} g(r_S)` over the rays of `R^4`.
pub fn phi(values: &BTreeMap<Subset, Rational>) -> Result<Rational, DepthgateError> {
    phi_on(&rays(), values)
}

pub fn phi_on(
    rays: &RaySet,
    values: &BTreeMap<Subset, Rational>,
) -> Result<Rational, DepthgateError> {
    let ordered = rays.values_in_order(values)?;
    Ok(phi_ordered(rays, &ordered))
}

pub(crate) fn phi_ordered(rays: &RaySet, values: &[Rational]) -> Rational {
    rays.subsets()
        .iter()
        .zip(values)
        .map(|(s, v)| if s.len() % 2 == 0 { v.clone() } else { -v })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Conformity {
    Conforming,
    /// `inner` is a proper subset of `outer` and their values are nonzero
    /// with opposite signs.
    Violation {
        inner: Subset,
        outer: Subset,
    },
}

impl Conformity {
    pub fn is_conforming(&self) -> bool {
        matches!(self, Conformity::Conforming)
    }
}

/// Whether `relu` of the function with these ray values stays H-conforming.
pub fn conforming_check(values: &BTreeMap<Subset, Rational>) -> Result<Conformity, DepthgateError> {
    conforming_check_on(&rays(), values)
}

pub fn conforming_check_on(
    rays: &RaySet,
    values: &BTreeMap<Subset, Rational>,
) -> Result<Conformity, DepthgateError> {
    let ordered = rays.values_in_order(values)?;
    Ok(conformity_ordered(rays, &ordered))
}

pub(crate) fn conformity_ordered(rays: &RaySet, values: &[Rational]) -> Conformity {
    for (i, j) in rays.nested_pairs() {
        if values[i].signum() * values[j].signum() < 0 {
            return Conformity::Violation {
                inner: rays.subsets()[i],
                outer: rays.subsets()[j],
            };
        }
    }
    Conformity::Conforming
}
