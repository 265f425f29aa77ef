//! Max-tree gadgets and the expression compiler.

use super::{CompileError, Layer, ReluNetwork};
use crate::cpwl::{enumerate_pieces, AffineTerm, CpwlExpr, MaxTerm};
use crate::decompose::{convexify, reduce_to_nplus1, split_by_sign};
use crate::linalg::{RatMatrix, RatVector, Rational};

/// An affine form over the units of the previous layer.
#[derive(Debug, Clone)]
struct Value {
    w: Vec<Rational>,
    c: Rational,
}

impl Value {
    fn from_affine(t: &AffineTerm) -> Self {
        Value {
            w: t.a.to_vec(),
            c: t.b.clone(),
        }
    }

    fn sub(&self, other: &Value) -> Value {
        Value {
            w: self.w.iter().zip(&other.w).map(|(p, q)| p - q).collect(),
            c: &self.c - &other.c,
        }
    }

    fn is_constant(&self) -> bool {
        self.w.iter().all(Rational::is_zero)
    }

    fn neg(&self) -> Value {
        Value {
            w: self.w.iter().map(|p| -p).collect(),
            c: -&self.c,
        }
    }
}

/// A new value: signed sum of neurons of the layer being built plus a constant.
type Combo = (Vec<(usize, i64)>, Rational);

struct LayerBuilder {
    neurons: Vec<Value>,
}

impl LayerBuilder {
    fn push(&mut self, v: Value) -> usize {
        self.neurons.push(v);
        self.neurons.len() - 1
    }

    /// `max{a, b} = relu(a - b) + relu(b) - relu(-b)`, or
    /// `relu(a - b) + b` when `b` is constant.
    fn max_pair(&mut self, a: &Value, b: &Value) -> Combo {
        let (a, b) = if a.is_constant() { (b, a) } else { (a, b) };
        if b.is_constant() {
            if a.is_constant() {
                return (Vec::new(), a.c.clone().max(b.c.clone()));
            }
            let d = self.push(a.sub(b));
            return (vec![(d, 1)], b.c.clone());
        }
        let d = self.push(a.sub(b));
        let (mut f, c) = self.forward(b);
        f.push((d, 1));
        (f, c)
    }

    /// `v = relu(v) - relu(-v)`; constants need no neurons.
    fn forward(&mut self, v: &Value) -> Combo {
        if v.is_constant() {
            return (Vec::new(), v.c.clone());
        }
        let p = self.push(v.clone());
        let n = self.push(v.neg());
        (vec![(p, 1), (n, -1)], Rational::zero())
    }

    fn finish(self, prev_width: usize, combos: Vec<Vec<Combo>>) -> (Layer, Vec<Vec<Value>>) {
        let width = self.neurons.len();
        let rows: Vec<Vec<Rational>> = self.neurons.iter().map(|v| v.w.clone()).collect();
        let layer = Layer {
            weights: RatMatrix::from_rows(rows, prev_width).expect("rows match previous width"),
            bias: self.neurons.into_iter().map(|v| v.c).collect(),
        };
        let groups = combos
            .into_iter()
            .map(|g| {
                g.into_iter()
                    .map(|(combo, c)| {
                        let mut w = vec![Rational::zero(); width];
                        for (i, s) in combo {
                            w[i] += Rational::from_int(s);
                        }
                        Value { w, c }
                    })
                    .collect()
            })
            .collect();
        (layer, groups)
    }
}

/// Replaces all constant values of a group by their maximum.
fn merge_constants(group: Vec<Value>) -> Vec<Value> {
    let (consts, mut rest): (Vec<Value>, Vec<Value>) =
        group.into_iter().partition(Value::is_constant);
    if let Some(c) = consts
        .into_iter()
        .reduce(|a, b| if a.c >= b.c { a } else { b })
    {
        rest.insert(0, c);
    }
    rest
}

fn ceil_log2(p: usize) -> usize {
    if p <= 1 {
        0
    } else {
        (usize::BITS - (p - 1).leading_zeros()) as usize
    }
}

/// Builds a network from value groups over `prev_width` units that already
/// passed through `layers`. Each group is reduced to its maximum by pairing
/// values layer by layer; groups finishing early are forwarded unchanged.
/// The output is `sum_j coeffs[j] * max(group_j)`.
fn reduce_groups(
    input_dim: usize,
    mut layers: Vec<Layer>,
    mut prev_width: usize,
    mut groups: Vec<Vec<Value>>,
    coeffs: &[Rational],
) -> ReluNetwork {
    groups = groups.into_iter().map(merge_constants).collect();
    let target = groups.iter().map(|g| ceil_log2(g.len())).max().unwrap_or(0);
    for _ in 0..target {
        let mut b = LayerBuilder {
            neurons: Vec::new(),
        };
        let mut combos = Vec::with_capacity(groups.len());
        for g in &groups {
            let mut next = Vec::new();
            if g.len() == 1 {
                next.push(b.forward(&g[0]));
            } else {
                for pair in g.chunks(2) {
                    match pair {
                        [a, c] => next.push(b.max_pair(a, c)),
                        [a] => next.push(b.forward(a)),
                        _ => unreachable!(),
                    }
                }
            }
            combos.push(next);
        }
        let (layer, next_groups) = b.finish(prev_width, combos);
        prev_width = layer.width();
        layers.push(layer);
        groups = next_groups;
    }
    let mut output = vec![Rational::zero(); prev_width];
    let mut bias = Rational::zero();
    for (g, c) in groups.iter().zip(coeffs) {
        let v = &g[0];
        for (o, w) in output.iter_mut().zip(&v.w) {
            o.add_mul(c, w);
        }
        bias.add_mul(c, &v.c);
    }
    ReluNetwork::new(input_dim, layers, RatVector::new(output), bias)
        .expect("builder keeps shapes consistent")
}

/// A network computing `max` of the given affine terms with
/// `ceil(log2 p)` hidden layers of pairwise gadgets.
pub fn max_tree(terms: &[AffineTerm]) -> Result<ReluNetwork, CompileError> {
    let Some(first) = terms.first() else {
        return Err(CompileError::EmptyTerms);
    };
    let n = first.dim();
    if let Some(t) = terms.iter().find(|t| t.dim() != n) {
        return Err(CompileError::DimensionMismatch {
            expected: n,
            found: t.dim(),
        });
    }
    let group = terms.iter().map(Value::from_affine).collect();
    Ok(reduce_groups(
        n,
        Vec::new(),
        n,
        vec![group],
        &[Rational::one()],
    ))
}

/// One max tree per summand, side by side, combined by the output layer.
pub fn compile_expr(expr: &CpwlExpr) -> ReluNetwork {
    let n = expr.dim();
    if expr.is_zero() {
        return ReluNetwork::new(n, Vec::new(), RatVector::zeros(n), Rational::zero())
            .expect("affine network");
    }
    let groups = expr
        .summands()
        .iter()
        .map(|(_, m)| m.terms().iter().map(Value::from_affine).collect())
        .collect();
    let coeffs: Vec<Rational> = expr.summands().iter().map(|(c, _)| c.clone()).collect();
    reduce_groups(n, Vec::new(), n, groups, &coeffs)
}

/// Rewrites `expr` as a signed sum of maxima of at most `n + 1` terms each.
///
/// The default route splits the summands by sign. With `via_convexify`, the
/// function is written as `g - h` with `g, h` convex, each side is taken as
/// the max of its own pieces, and both maxima are decomposed.
pub fn min_depth_expression(
    expr: &CpwlExpr,
    via_convexify: bool,
) -> Result<CpwlExpr, CompileError> {
    let n = expr.dim();
    let mut out = CpwlExpr::zero(n);
    if via_convexify {
        let pieces = enumerate_pieces(expr);
        let (g, h) = convexify(expr, &pieces)?;
        for (side, sign) in [(&g, 1), (&h, -1)] {
            let side_pieces = enumerate_pieces(side);
            let m = MaxTerm::new(side_pieces)?;
            let reduced = reduce_to_nplus1(&m);
            out = out.add(&reduced.scale(&Rational::from_int(sign)))?;
        }
    } else {
        let (g, h) = split_by_sign(expr);
        for (side, sign) in [(&g, 1), (&h, -1)] {
            for (c, m) in side.summands() {
                let reduced = reduce_to_nplus1(m);
                out = out.add(&reduced.scale(&(c * Rational::from_int(sign))))?;
            }
        }
    }
    Ok(out)
}

/// Compiles `expr` into a network with at most `ceil(log2(n + 1))` hidden
/// layers.
pub fn compile_min_depth(
    expr: &CpwlExpr,
    via_convexify: bool,
) -> Result<ReluNetwork, CompileError> {
    let reduced = min_depth_expression(expr, via_convexify)?;
    let net = compile_expr(&reduced);
    let bound = ceil_log2(expr.dim() + 1);
    if net.hidden_layers() > bound {
        return Err(CompileError::DepthExceeded {
            depth: net.hidden_layers(),
            bound,
        });
    }
    Ok(net)
}

/// `max{0, x_1, ..., x_{n-3}, max{x_{n-2}, x_{n-1}} + max{0, x_n}}`.
pub fn witness_value(x: &[Rational]) -> Rational {
    let n = x.len();
    let tail = x[n - 3].clone().max(x[n - 2].clone()) + x[n - 1].clone().max(Rational::zero());
    x[..n - 3]
        .iter()
        .cloned()
        .fold(Rational::zero().max(tail), Rational::max)
}

/// The witness function for `n = 2^k >= 4` as a single max term and as a
/// network with `k` hidden layers. The first layer computes `2^{k-1}`
/// quantities (pairwise maxima of `0, x_1, ..., x_{n-3}` and the compound
/// last term); a max tree of depth `k - 1` finishes.
pub fn richer_witness(n: usize) -> Result<(CpwlExpr, ReluNetwork), CompileError> {
    if n < 4 || !n.is_power_of_two() {
        return Err(CompileError::WitnessSize(n));
    }
    let coord = |i: usize| AffineTerm::coordinate(n, i);
    let mut terms: Vec<AffineTerm> = (0..n - 3).map(coord).collect();
    terms.push(AffineTerm::constant(n, Rational::zero()));
    for i in [n - 3, n - 2] {
        terms.push(coord(i));
        terms.push(coord(i).add(&coord(n - 1)));
    }
    let expr = CpwlExpr::from_max(MaxTerm::new(terms)?);

    let mut simple: Vec<Value> = vec![Value::from_affine(&AffineTerm::constant(
        n,
        Rational::zero(),
    ))];
    simple.extend((0..n - 3).map(|i| Value::from_affine(&coord(i))));
    let mut b = LayerBuilder {
        neurons: Vec::new(),
    };
    let mut combos: Vec<Combo> = simple.chunks(2).map(|p| b.max_pair(&p[0], &p[1])).collect();
    let mut compound = b.max_pair(
        &Value::from_affine(&coord(n - 3)),
        &Value::from_affine(&coord(n - 2)),
    );
    let r = b.push(Value::from_affine(&coord(n - 1)));
    compound.0.push((r, 1));
    combos.push(compound);
    let (layer, groups) = b.finish(n, vec![combos]);
    let width = layer.width();
    let net = reduce_groups(n, vec![layer], width, groups, &[Rational::one()]);
    debug_assert_eq!(net.hidden_layers(), n.trailing_zeros() as usize);
    Ok((expr, net))
}
