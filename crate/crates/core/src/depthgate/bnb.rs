//! Exact branch and bound over the binaries of a [`MipModel`].
//!
//! One bounded-variable tableau is shared by all nodes. A node is a set of
//! binary fixings; moving to a node only changes bounds, which keeps the
//! basis dual feasible, and the dual simplex then reoptimizes with the
//! incumbent as cutoff.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::MipModel;
use crate::linalg::simplex::{DualOutcome, PrimalOutcome, Simplex};
use crate::linalg::{LinalgError, PivotRule, RatVector, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Branching {
    /// Binary whose relaxed value is closest to 1/2; ties by index.
    #[default]
    MostFractional,
    FirstFractional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum NodeSelection {
    /// Largest parent bound first; ties go to the deeper node.
    BestBound,
    #[default]
    DepthFirst,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub branching: Branching,
    pub selection: NodeSelection,
    pub pivot_rule: PivotRule,
    /// Nodes to process in this session before returning a checkpoint.
    pub node_budget: u64,
    /// Try "all binaries at 0" and "all binaries at 1" before branching.
    pub trivial_heuristics: bool,
    /// Fix nonbasic binaries whose reduced cost alone closes the gap to the
    /// incumbent.
    pub reduced_cost_fixing: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            branching: Branching::MostFractional,
            selection: NodeSelection::DepthFirst,
            pivot_rule: PivotRule::Hybrid,
            node_budget: 10_000_000,
            trivial_heuristics: true,
            reduced_cost_fixing: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpenNode {
    /// `(variable index, value)` pairs, in branching order.
    pub fixings: Vec<(usize, bool)>,
    /// Upper bound inherited from the parent relaxation.
    pub bound: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundRecord {
    /// Nodes processed so far, over all sessions.
    pub nodes: u64,
    pub bound: Rational,
    pub incumbent: Option<Rational>,
}

/// Resumable solver state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub model_name: String,
    pub num_vars: usize,
    pub num_constraints: usize,
    pub sessions: u32,
    pub nodes: u64,
    pub incumbent_value: Option<Rational>,
    pub incumbent: Option<Vec<Rational>>,
    pub open: Vec<OpenNode>,
    pub trace: Vec<BoundRecord>,
}

impl Checkpoint {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// True if the recorded bound never increases and the incumbent never decreases.
    pub fn trace_is_monotone(&self) -> bool {
        self.trace.windows(2).all(|w| {
            let inc_ok = match (&w[0].incumbent, &w[1].incumbent) {
                (Some(a), Some(b)) => b >= a,
                (Some(_), None) => false,
                _ => true,
            };
            w[1].bound <= w[0].bound && w[1].nodes >= w[0].nodes && inc_ok
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MipStatus {
    Optimal,
    BudgetExhausted,
    /// No integer feasible point. The certificate is present when the root
    /// relaxation is already infeasible.
    Infeasible {
        farkas: Option<RatVector>,
    },
    RelaxationUnbounded,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MipSolution {
    pub status: MipStatus,
    /// Proven upper bound on the optimum (`None` if infeasible or unbounded).
    pub bound: Option<Rational>,
    pub incumbent_value: Option<Rational>,
    pub incumbent: Option<Vec<Rational>>,
    /// Nodes processed in this session.
    pub session_nodes: u64,
    pub pivots: u64,
    pub checkpoint: Checkpoint,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MipError {
    #[error(transparent)]
    Model(#[from] LinalgError),
    #[error("checkpoint was written for a different model")]
    CheckpointMismatch,
}

struct Entry {
    key: (Rational, usize, i64),
    node: OpenNode,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key
    }
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key.cmp(&other.key)
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Open nodes with a bound multiset for the global bound.
struct Frontier {
    selection: NodeSelection,
    heap: BinaryHeap<Entry>,
    bounds: BTreeMap<Rational, usize>,
    seq: i64,
}

impl Frontier {
    fn new(selection: NodeSelection) -> Self {
        Frontier {
            selection,
            heap: BinaryHeap::new(),
            bounds: BTreeMap::new(),
            seq: 0,
        }
    }

    fn push(&mut self, node: OpenNode) {
        self.seq += 1;
        let depth = node.fixings.len();
        let key = match self.selection {
            NodeSelection::BestBound => (node.bound.clone(), depth, -self.seq),
            NodeSelection::DepthFirst => (Rational::zero(), depth, self.seq),
        };
        *self.bounds.entry(node.bound.clone()).or_insert(0) += 1;
        self.heap.push(Entry { key, node });
    }

    fn pop(&mut self) -> Option<OpenNode> {
        let node = self.heap.pop()?.node;
        let slot = self.bounds.get_mut(&node.bound).expect("tracked bound");
        *slot -= 1;
        if *slot == 0 {
            self.bounds.remove(&node.bound);
        }
        Some(node)
    }

    fn max_bound(&self) -> Option<&Rational> {
        self.bounds.keys().next_back()
    }

    fn into_nodes(self) -> Vec<OpenNode> {
        self.heap
            .into_sorted_vec()
            .into_iter()
            .rev()
            .map(|e| e.node)
            .collect()
    }
}

/// Solves with default settings and the given node budget.
pub fn solve_mip(model: &MipModel, node_budget: u64) -> Result<MipSolution, MipError> {
    let config = SolverConfig {
        node_budget,
        ..SolverConfig::default()
    };
    solve_mip_with(model, &config, None)
}

/// Solves, optionally continuing from a checkpoint of an earlier session.
pub fn solve_mip_with(
    model: &MipModel,
    config: &SolverConfig,
    resume: Option<Checkpoint>,
) -> Result<MipSolution, MipError> {
    let lp = model.lp_relaxation()?;
    let binaries = model.binary_indices();
    let mut sx: Simplex = lp.simplex();
    let mut checkpoint = match resume {
        Some(cp) => {
            if cp.model_name != model.name
                || cp.num_vars != model.num_vars()
                || cp.num_constraints != model.constraints.len()
            {
                return Err(MipError::CheckpointMismatch);
            }
            cp
        }
        None => Checkpoint {
            model_name: model.name.clone(),
            num_vars: model.num_vars(),
            num_constraints: model.constraints.len(),
            sessions: 0,
            nodes: 0,
            incumbent_value: None,
            incumbent: None,
            open: Vec::new(),
            trace: Vec::new(),
        },
    };
    let fresh = checkpoint.sessions == 0;
    checkpoint.sessions += 1;

    let root = match sx.solve_primal(config.pivot_rule) {
        PrimalOutcome::Optimal => sx.objective_value(),
        PrimalOutcome::Infeasible { farkas } => {
            return Ok(finish(
                MipStatus::Infeasible {
                    farkas: Some(RatVector::new(farkas)),
                },
                None,
                checkpoint,
                0,
                sx.pivots,
            ));
        }
        PrimalOutcome::Unbounded { .. } => {
            return Ok(finish(
                MipStatus::RelaxationUnbounded,
                None,
                checkpoint,
                0,
                sx.pivots,
            ));
        }
    };

    let relaxed = lp.bounds.clone();
    let mut state = NodeState {
        fixed: vec![None; model.num_vars()],
    };
    let mut frontier = Frontier::new(config.selection);
    if fresh {
        if config.trivial_heuristics {
            for value in [false, true] {
                let fix: Vec<(usize, bool)> = binaries.iter().map(|&j| (j, value)).collect();
                state.apply(&mut sx, &relaxed, &fix);
                if sx.solve_dual(config.pivot_rule, None, u64::MAX) == DualOutcome::Optimal {
                    let v = sx.objective_value();
                    if checkpoint.incumbent_value.as_ref().is_none_or(|b| v > *b) {
                        checkpoint.incumbent = Some(sx.structural_values());
                        checkpoint.incumbent_value = Some(v);
                    }
                }
            }
        }
        frontier.push(OpenNode {
            fixings: Vec::new(),
            bound: root,
        });
    } else {
        for node in std::mem::take(&mut checkpoint.open) {
            frontier.push(node);
        }
    }

    let mut session_nodes = 0u64;
    record(&mut checkpoint, &frontier);
    while let Some(node) = frontier.pop() {
        if session_nodes >= config.node_budget {
            frontier.push(node);
            break;
        }
        session_nodes += 1;
        checkpoint.nodes += 1;
        let cutoff = checkpoint.incumbent_value.clone();
        if cutoff.as_ref().is_some_and(|c| node.bound <= *c) {
            record(&mut checkpoint, &frontier);
            continue;
        }
        state.apply(&mut sx, &relaxed, &node.fixings);
        let outcome = sx.solve_dual(config.pivot_rule, cutoff.as_ref(), u64::MAX);
        debug_assert!(sx.is_dual_feasible());
        if outcome != DualOutcome::Optimal {
            record(&mut checkpoint, &frontier);
            continue;
        }
        debug_assert!(sx.is_primal_feasible());
        let value = sx.objective_value();
        debug_assert!(value <= node.bound);
        let x = sx.structural_values();
        match pick_branch(config.branching, &binaries, &x) {
            None => {
                checkpoint.incumbent_value = Some(value);
                checkpoint.incumbent = Some(x);
            }
            Some(j) => {
                let mut base = node.fixings.clone();
                if config.reduced_cost_fixing {
                    if let Some(inc) = &cutoff {
                        reduced_cost_fix(&sx, &binaries, &state, &(&value - inc), &x, &mut base);
                    }
                }
                let up_first = x[j] >= Rational::new(1, 2);
                for dir in [!up_first, up_first] {
                    let mut fixings = base.clone();
                    fixings.push((j, dir));
                    frontier.push(OpenNode {
                        fixings,
                        bound: value.clone(),
                    });
                }
            }
        }
        record(&mut checkpoint, &frontier);
    }

    let exhausted = frontier.max_bound().is_some();
    checkpoint.open = frontier.into_nodes();
    let status = if exhausted {
        MipStatus::BudgetExhausted
    } else if checkpoint.incumbent_value.is_some() {
        MipStatus::Optimal
    } else {
        MipStatus::Infeasible { farkas: None }
    };
    let bound = global_bound(&checkpoint, checkpoint.open.iter().map(|n| &n.bound).max());
    Ok(finish(status, bound, checkpoint, session_nodes, sx.pivots))
}

struct NodeState {
    fixed: Vec<Option<bool>>,
}

impl NodeState {
    /// Moves the tableau to the given fixings, touching only changed binaries.
    fn apply(
        &mut self,
        sx: &mut Simplex,
        relaxed: &[crate::linalg::Bounds],
        fixings: &[(usize, bool)],
    ) {
        let mut want = vec![None; self.fixed.len()];
        for &(j, v) in fixings {
            want[j] = Some(v);
        }
        for (j, w) in want.iter().enumerate() {
            if *w == self.fixed[j] {
                continue;
            }
            let (lo, hi) = match w {
                Some(v) => {
                    let r = Rational::from_int(i64::from(*v));
                    (Some(r.clone()), Some(r))
                }
                None => (relaxed[j].lower.clone(), relaxed[j].upper.clone()),
            };
            let kept = sx.set_bounds(j, lo, hi);
            debug_assert!(kept, "binary bounds are finite");
            self.fixed[j] = *w;
        }
    }
}

/// Any point of the node relaxation has objective at most
/// `value + d_j (x_j - current x_j)` for every nonbasic `j`, so a binary
/// whose move to the other bound costs at least `gap` can stay where it is.
fn reduced_cost_fix(
    sx: &Simplex,
    binaries: &[usize],
    state: &NodeState,
    gap: &Rational,
    x: &[Rational],
    fixings: &mut Vec<(usize, bool)>,
) {
    for &j in binaries {
        if state.fixed[j].is_some() {
            continue;
        }
        let Some(d) = sx.reduced_cost(j) else {
            continue;
        };
        if x[j].is_zero() && -d >= *gap {
            fixings.push((j, false));
        } else if x[j].is_one() && *d >= *gap {
            fixings.push((j, true));
        }
    }
}

fn pick_branch(rule: Branching, binaries: &[usize], x: &[Rational]) -> Option<usize> {
    let half = Rational::new(1, 2);
    let mut best: Option<(usize, Rational)> = None;
    for &j in binaries {
        if x[j].is_integer() {
            continue;
        }
        if rule == Branching::FirstFractional {
            return Some(j);
        }
        let dist = (&x[j] - &half).abs();
        if best.as_ref().is_none_or(|(_, d)| dist < *d) {
            best = Some((j, dist));
        }
    }
    best.map(|(j, _)| j)
}

fn global_bound(cp: &Checkpoint, open_max: Option<&Rational>) -> Option<Rational> {
    match (open_max, &cp.incumbent_value) {
        (Some(b), Some(i)) => Some(b.clone().max(i.clone())),
        (Some(b), None) => Some(b.clone()),
        (None, Some(i)) => Some(i.clone()),
        (None, None) => None,
    }
}

/// Appends a trace record when the bound or incumbent changed.
fn record(cp: &mut Checkpoint, frontier: &Frontier) {
    let Some(bound) = global_bound(cp, frontier.max_bound()) else {
        return;
    };
    let changed = cp
        .trace
        .last()
        .is_none_or(|r| r.bound != bound || r.incumbent != cp.incumbent_value);
    if changed {
        cp.trace.push(BoundRecord {
            nodes: cp.nodes,
            bound,
            incumbent: cp.incumbent_value.clone(),
        });
    }
}

fn finish(
    status: MipStatus,
    bound: Option<Rational>,
    checkpoint: Checkpoint,
    session_nodes: u64,
    pivots: u64,
) -> MipSolution {
    MipSolution {
        status,
        bound,
        incumbent_value: checkpoint.incumbent_value.clone(),
        incumbent: checkpoint.incumbent.clone(),
        session_nodes,
        pivots,
        checkpoint,
    }
}

impl MipSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == MipStatus::Optimal
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::depthgate::{MipConstraint, MipVariable, VarKind};
    use crate::linalg::Sense;

    fn toy() -> MipModel {
        MipModel {
            name: "TOY".into(),
            variables: vec![MipVariable {
                name: "z".into(),
                kind: VarKind::Binary,
                lower: Some(Rational::zero()),
                upper: Some(Rational::one()),
            }],
            constraints: vec![MipConstraint {
                name: "R1".into(),
                coefs: vec![(0, Rational::one())],
                sense: Sense::Le,
                rhs: Rational::one(),
            }],
            objective: vec![(0, Rational::one())],
        }
    }

    #[test]
    fn toy_binary() {
        let sol = solve_mip(&toy(), 100).unwrap();
        assert!(sol.is_optimal());
        assert_eq!(sol.incumbent_value, Some(Rational::one()));
        assert_eq!(sol.bound, Some(Rational::one()));
    }

    /// max 2x + 3y + z, 3x + 4y + 2z <= 5 (scaled knapsack) over binaries.
    fn knapsack() -> MipModel {
        let bin = |n: &str| MipVariable {
            name: n.into(),
            kind: VarKind::Binary,
            lower: Some(Rational::zero()),
            upper: Some(Rational::one()),
        };
        MipModel {
            name: "KNAP".into(),
            variables: vec![bin("x"), bin("y"), bin("z")],
            constraints: vec![MipConstraint {
                name: "R1".into(),
                coefs: vec![
                    (0, Rational::from_int(3)),
                    (1, Rational::from_int(4)),
                    (2, Rational::from_int(2)),
                ],
                sense: Sense::Le,
                rhs: Rational::from_int(5),
            }],
            objective: vec![
                (0, Rational::from_int(2)),
                (1, Rational::from_int(3)),
                (2, Rational::one()),
            ],
        }
    }

    #[test]
    fn knapsack_all_rules() {
        for branching in [Branching::MostFractional, Branching::FirstFractional] {
            for selection in [NodeSelection::BestBound, NodeSelection::DepthFirst] {
                for (pivot_rule, fixing) in [(PivotRule::Bland, false), (PivotRule::Hybrid, true)] {
                    let cfg = SolverConfig {
                        branching,
                        selection,
                        pivot_rule,
                        node_budget: 1000,
                        trivial_heuristics: false,
                        reduced_cost_fixing: fixing,
                    };
                    let sol = solve_mip_with(&knapsack(), &cfg, None).unwrap();
                    assert!(sol.is_optimal());
                    // x + z (weight 5, value 3) or y (weight 4, value 3).
                    assert_eq!(sol.incumbent_value, Some(Rational::from_int(3)));
                    assert!(sol.checkpoint.trace_is_monotone());
                }
            }
        }
    }

    #[test]
    fn resume_finishes_the_same() {
        let model = knapsack();
        let cfg = SolverConfig {
            node_budget: 1,
            trivial_heuristics: false,
            ..SolverConfig::default()
        };
        let mut sol = solve_mip_with(&model, &cfg, None).unwrap();
        let mut sessions = 1;
        while sol.status == MipStatus::BudgetExhausted {
            let cp = Checkpoint::from_json(&sol.checkpoint.to_json()).unwrap();
            sol = solve_mip_with(&model, &cfg, Some(cp)).unwrap();
            sessions += 1;
        }
        assert!(sessions > 1);
        assert_eq!(sol.incumbent_value, Some(Rational::from_int(3)));
        assert_eq!(sol.checkpoint.sessions, sessions);
        assert!(sol.checkpoint.trace_is_monotone());
    }

    fn random_model(seed: u64) -> MipModel {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let nb = rng.gen_range(1..=5);
        let nc = rng.gen_range(0..=2);
        let mut variables = Vec::new();
        for k in 0..nb {
            variables.push(MipVariable {
                name: format!("b{k}"),
                kind: VarKind::Binary,
                lower: Some(Rational::zero()),
                upper: Some(Rational::one()),
            });
        }
        for k in 0..nc {
            variables.push(MipVariable {
                name: format!("c{k}"),
                kind: VarKind::Continuous,
                lower: Some(Rational::from_int(-3)),
                upper: Some(Rational::from_int(3)),
            });
        }
        let n = nb + nc;
        let mut int = |lo: i64, hi: i64| Rational::from_int(rng.gen_range(lo..=hi));
        let constraints = (0..4)
            .map(|i| MipConstraint {
                name: format!("R{i}"),
                coefs: (0..n).map(|j| (j, int(-4, 4))).collect(),
                sense: if i % 3 == 0 { Sense::Ge } else { Sense::Le },
                rhs: int(-3, 6),
            })
            .collect();
        let objective = (0..n).map(|j| (j, int(-5, 5))).collect();
        MipModel {
            name: "RAND".into(),
            variables,
            constraints,
            objective,
        }
    }

    #[test]
    fn agrees_with_enumeration_on_random_models() {
        for seed in 0..150 {
            let model = random_model(seed);
            let oracle = crate::depthgate::brute_force_optimum(&model).unwrap();
            for selection in [NodeSelection::BestBound, NodeSelection::DepthFirst] {
                let cfg = SolverConfig {
                    selection,
                    ..SolverConfig::default()
                };
                let sol = solve_mip_with(&model, &cfg, None).unwrap();
                match &oracle {
                    Some(v) => {
                        assert!(sol.is_optimal(), "seed {seed}");
                        assert_eq!(sol.incumbent_value.as_ref(), Some(v), "seed {seed}");
                        assert!(model.is_feasible(sol.incumbent.as_ref().unwrap()));
                    }
                    None => assert!(
                        matches!(sol.status, MipStatus::Infeasible { .. }),
                        "seed {seed}"
                    ),
                }
                assert!(sol.checkpoint.trace_is_monotone());
            }
        }
    }

    #[test]
    fn infeasible_root_has_certificate() {
        let mut m = toy();
        m.constraints[0].sense = Sense::Ge;
        m.constraints[0].rhs = Rational::from_int(2);
        let sol = solve_mip(&m, 10).unwrap();
        match sol.status {
            MipStatus::Infeasible { farkas: Some(y) } => {
                assert!(m.lp_relaxation().unwrap().verify_farkas(&y));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn integer_infeasible_without_certificate() {
        // 2z = 1 has the relaxed solution 1/2 only.
        let mut m = toy();
        m.constraints[0].coefs[0].1 = Rational::from_int(2);
        m.constraints[0].sense = Sense::Eq;
        let sol = solve_mip(&m, 10).unwrap();
        assert_eq!(sol.status, MipStatus::Infeasible { farkas: None });
    }

    #[test]
    fn checkpoint_mismatch() {
        let sol = solve_mip(&toy(), 0).unwrap();
        let err = solve_mip_with(&knapsack(), &SolverConfig::default(), Some(sol.checkpoint));
        assert_eq!(err.unwrap_err(), MipError::CheckpointMismatch);
    }
}
