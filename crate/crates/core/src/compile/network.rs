//! Layered ReLU networks with exact evaluation.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::CompileError;
use crate::linalg::{RatMatrix, RatVector, Rational};

/// One hidden layer: `x -> max{0, W x + b}` componentwise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layer {
    pub weights: RatMatrix,
    pub bias: RatVector,
}

impl Layer {
    pub fn width(&self) -> usize {
        self.weights.rows()
    }
}

/// Depth counts the output layer; width and size count hidden neurons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NetworkStats {
    pub depth: usize,
    pub width: usize,
    pub size: usize,
}

impl NetworkStats {
    pub fn hidden_layers(&self) -> usize {
        self.depth - 1
    }
}

impl std::fmt::Display for NetworkStats {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "depth {} width {} size {}",
            self.depth, self.width, self.size
        )
    }
}

/// Hidden ReLU layers followed by an affine scalar output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReluNetwork {
    input_dim: usize,
    layers: Vec<Layer>,
    output: RatVector,
    output_bias: Rational,
}

impl ReluNetwork {
    pub fn new(
        input_dim: usize,
        layers: Vec<Layer>,
        output: RatVector,
        output_bias: Rational,
    ) -> Result<Self, CompileError> {
        let mut prev = input_dim;
        for (l, layer) in layers.iter().enumerate() {
            if layer.weights.cols() != prev || layer.bias.dim() != layer.width() {
                return Err(CompileError::LayerShape { layer: l + 1 });
            }
            if layer.width() == 0 {
                return Err(CompileError::LayerShape { layer: l + 1 });
            }
            prev = layer.width();
        }
        if output.dim() != prev {
            return Err(CompileError::LayerShape {
                layer: layers.len() + 1,
            });
        }
        Ok(ReluNetwork {
            input_dim,
            layers,
            output,
            output_bias,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn output(&self) -> &RatVector {
        &self.output
    }

    pub fn output_bias(&self) -> &Rational {
        &self.output_bias
    }

    pub fn hidden_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn is_bias_free(&self) -> bool {
        self.output_bias.is_zero() && self.layers.iter().all(|l| l.bias.is_zero())
    }

    pub fn stats(&self) -> NetworkStats {
        network_stats(self)
    }

    pub fn eval(&self, x: &RatVector) -> Result<Rational, CompileError> {
        eval_network(self, x)
    }

    pub(crate) fn eval_unchecked(&self, x: &[Rational]) -> Rational {
        let mut cur: Vec<Rational> = x.to_vec();
        for layer in &self.layers {
            cur = (0..layer.width())
                .map(|i| {
                    let mut v = layer.bias[i].clone();
                    for (w, c) in layer.weights.row(i).iter().zip(&cur) {
                        if !w.is_zero() {
                            v.add_mul(w, c);
                        }
                    }
                    v.max(Rational::zero())
                })
                .collect();
        }
        let mut out = self.output_bias.clone();
        for (w, c) in self.output.iter().zip(&cur) {
            out.add_mul(w, c);
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&RawNetwork::from(self)).expect("network serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, CompileError> {
        let raw: RawNetwork =
            serde_json::from_str(s).map_err(|e| CompileError::Json(e.to_string()))?;
        raw.try_into()
    }

    /// Graphviz rendering of the layered graph; edge labels are weights and
    /// node labels carry biases.
    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph relu {\n  rankdir=LR;\n  node [shape=circle];\n");
        for j in 0..self.input_dim {
            let _ = writeln!(s, "  x{j} [label=\"x{}\", shape=box];", j + 1);
        }
        let name = |l: usize, i: usize| -> String {
            if l == 0 {
                format!("x{i}")
            } else {
                format!("h{l}_{i}")
            }
        };
        for (l, layer) in self.layers.iter().enumerate() {
            for i in 0..layer.width() {
                let _ = writeln!(s, "  {} [label=\"{}\"];", name(l + 1, i), layer.bias[i]);
                for (j, w) in layer.weights.row(i).iter().enumerate() {
                    if !w.is_zero() {
                        let _ =
                            writeln!(s, "  {} -> {} [label=\"{w}\"];", name(l, j), name(l + 1, i));
                    }
                }
            }
        }
        let _ = writeln!(
            s,
            "  out [label=\"{}\", shape=doublecircle];",
            self.output_bias
        );
        for (j, w) in self.output.iter().enumerate() {
            if !w.is_zero() {
                let _ = writeln!(
                    s,
                    "  {} -> out [label=\"{w}\"];",
                    name(self.layers.len(), j)
                );
            }
        }
        s.push_str("}\n");
        s
    }
}

pub fn eval_network(net: &ReluNetwork, x: &RatVector) -> Result<Rational, CompileError> {
    if x.dim() != net.input_dim {
        return Err(CompileError::DimensionMismatch {
            expected: net.input_dim,
            found: x.dim(),
        });
    }
    Ok(net.eval_unchecked(x))
}

/// The same weights with every bias set to zero.
pub fn homogenize(net: &ReluNetwork) -> ReluNetwork {
    ReluNetwork {
        input_dim: net.input_dim,
        layers: net
            .layers
            .iter()
            .map(|l| Layer {
                weights: l.weights.clone(),
                bias: RatVector::zeros(l.width()),
            })
            .collect(),
        output: net.output.clone(),
        output_bias: Rational::zero(),
    }
}

pub fn network_stats(net: &ReluNetwork) -> NetworkStats {
    NetworkStats {
        depth: net.layers.len() + 1,
        width: net.layers.iter().map(Layer::width).max().unwrap_or(0),
        size: net.layers.iter().map(Layer::width).sum(),
    }
}

#[derive(Serialize, Deserialize)]
struct RawLayer {
    #[serde(rename = "A")]
    a: Vec<Vec<Rational>>,
    b: Vec<Rational>,
}

#[derive(Serialize, Deserialize)]
struct RawOutput {
    #[serde(rename = "A")]
    a: Vec<Vec<Rational>>,
    #[serde(default)]
    b: Rational,
}

#[derive(Serialize, Deserialize)]
struct RawNetwork {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    input_dim: Option<usize>,
    layers: Vec<RawLayer>,
    out: RawOutput,
}

impl From<&ReluNetwork> for RawNetwork {
    fn from(net: &ReluNetwork) -> Self {
        RawNetwork {
            input_dim: Some(net.input_dim),
            layers: net
                .layers
                .iter()
                .map(|l| RawLayer {
                    a: l.weights.to_rows(),
                    b: l.bias.to_vec(),
                })
                .collect(),
            out: RawOutput {
                a: vec![net.output.to_vec()],
                b: net.output_bias.clone(),
            },
        }
    }
}

impl TryFrom<RawNetwork> for ReluNetwork {
    type Error = CompileError;

    fn try_from(raw: RawNetwork) -> Result<Self, CompileError> {
        let [out_row]: [Vec<Rational>; 1] = raw
            .out
            .a
            .try_into()
            .map_err(|_| CompileError::MultiOutput)?;
        let input_dim = raw
            .input_dim
            .or_else(|| raw.layers.first().and_then(|l| l.a.first()).map(Vec::len))
            .unwrap_or(out_row.len());
        let mut prev = input_dim;
        let mut layers = Vec::new();
        for (l, rl) in raw.layers.into_iter().enumerate() {
            let weights = RatMatrix::from_rows(rl.a, prev)
                .map_err(|_| CompileError::LayerShape { layer: l + 1 })?;
            prev = weights.rows();
            layers.push(Layer {
                weights,
                bias: RatVector::new(rl.b),
            });
        }
        ReluNetwork::new(input_dim, layers, RatVector::new(out_row), raw.out.b)
    }
}
