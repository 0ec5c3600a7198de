//! Simultaneous Dykstra through the product-space reformulation.
//!
//! With weights `lambda_i > 0` summing to one, `X^m` carries the inner product
//! `sum_i lambda_i <u_i, v_i>`. The problem becomes a two-set problem between
//! the product `C_1 x ... x C_m` and the diagonal `{(x, ..., x)}`, whose
//! projection is the weighted mean. Cyclic Dykstra on that pair is the
//! simultaneous algorithm: all `m` projections start from the same point and
//! are then averaged. The tree variant averages bottom-up and may insert a
//! halfspace-QP step at internal nodes.

use rayon::prelude::*;

use crate::dykstra::extended::{extra_step, Extra};
use crate::dykstra::{
    DualState, ExtraBlock, Recorder, SolveError, SolveOptions, Solution, SweepValues,
};
use crate::geometry::{ConvexOperator, ConvexSet, GeometryError, Halfspace, ProjectionResult, SUPPORT_SNAP};
use crate::linalg::{add, axpy, dist, norm, sub};
use crate::problem::{Metric, Problem, ProblemError};

/// Positive weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights(Vec<f64>);

impl Weights {
    pub fn new(weights: Vec<f64>) -> Result<Self, ProblemError> {
        if weights.is_empty() {
            return Err(ProblemError::Weights("no weights".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(ProblemError::Weights(format!("weight {w} is not positive")));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(ProblemError::Weights(format!("weights sum to {sum}, not 1")));
        }
        Ok(Self(weights))
    }

    pub fn uniform(m: usize) -> Self {
        Self(vec![1.0 / m as f64; m])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// The two sets of the lifted problem, acting on stacked vectors of length `n m`.
#[derive(Debug, Clone, PartialEq)]
pub enum LiftedSet {
    /// `C_1 x ... x C_m`, projected blockwise.
    Product { sets: Vec<ConvexSet>, weights: Vec<f64> },
    /// `{(x, ..., x)}`, projected onto the weighted mean.
    Diagonal { weights: Vec<f64>, block: usize },
}

impl ConvexOperator for LiftedSet {
    fn dim(&self) -> usize {
        match self {
            LiftedSet::Product { sets, .. } => sets.iter().map(|s| s.dim()).sum(),
            LiftedSet::Diagonal { weights, block } => weights.len() * block,
        }
    }

    fn project(&self, z: &[f64]) -> Result<ProjectionResult, GeometryError> {
        let dim = ConvexOperator::dim(self);
        if z.len() != dim {
            return Err(GeometryError::DimensionMismatch { expected: dim, found: z.len() });
        }
        let x = match self {
            LiftedSet::Product { sets, .. } => {
                let n = dim / sets.len();
                let mut x = Vec::with_capacity(dim);
                for (i, s) in sets.iter().enumerate() {
                    x.extend(s.project(&z[i * n..(i + 1) * n])?.x);
                }
                x
            }
            LiftedSet::Diagonal { weights, block } => {
                let mean = weighted_mean(z, weights, *block);
                mean.iter().cycle().take(dim).copied().collect()
            }
        };
        Ok(ProjectionResult::from_projection(z, x))
    }

    /// Support function in the weighted inner product.
    fn support(&self, y: &[f64]) -> Result<f64, GeometryError> {
        let dim = ConvexOperator::dim(self);
        if y.len() != dim {
            return Err(GeometryError::DimensionMismatch { expected: dim, found: y.len() });
        }
        match self {
            LiftedSet::Product { sets, weights } => {
                let n = dim / sets.len();
                let mut total = 0.0;
                for (i, s) in sets.iter().enumerate() {
                    let yi = &y[i * n..(i + 1) * n];
                    if yi.iter().any(|v| *v != 0.0) {
                        total += weights[i] * s.support(yi)?;
                    }
                }
                Ok(total)
            }
            LiftedSet::Diagonal { weights, block } => {
                let mean = weighted_mean(y, weights, *block);
                if norm(&mean) <= SUPPORT_SNAP * norm(y).max(1.0) {
                    Ok(0.0)
                } else {
                    Ok(f64::INFINITY)
                }
            }
        }
    }
}

fn weighted_mean(z: &[f64], weights: &[f64], block: usize) -> Vec<f64> {
    let mut mean = vec![0.0; block];
    for (i, w) in weights.iter().enumerate() {
        axpy(*w, &z[i * block..(i + 1) * block], &mut mean);
    }
    mean
}

fn stack(blocks: &[Vec<f64>]) -> Vec<f64> {
    blocks.iter().flatten().copied().collect()
}

/// The lifted pair `(C_1 x ... x C_m, diagonal)` with point `(d, ..., d)` and
/// the weighted inner product.
pub fn product_lift(problem: &Problem, weights: &Weights) -> Result<Problem<LiftedSet>, ProblemError> {
    if weights.len() != problem.len() {
        return Err(ProblemError::Weights(format!(
            "{} weights for {} sets",
            weights.len(),
            problem.len()
        )));
    }
    let n = problem.dim();
    let w = weights.as_slice().to_vec();
    let d = stack(&vec![problem.d.clone(); problem.len()]);
    Problem::with_metric(
        d,
        vec![
            LiftedSet::Product { sets: problem.sets.clone(), weights: w.clone() },
            LiftedSet::Diagonal { weights: w.clone(), block: n },
        ],
        Metric::Weighted { weights: w, block: n },
    )
}

/// Starting state of the lifted problem matching simultaneous blocks `y`:
/// `[Y, D - (x0, ..., x0) - Y]` with `x0 = d - sum_i lambda_i y_i`.
pub fn lift_warmstart(problem: &Problem, weights: &Weights, blocks: &[Vec<f64>]) -> Result<DualState, ProblemError> {
    problem.check_blocks(blocks)?;
    let lifted = product_lift(problem, weights)?;
    let x0 = weighted_primal(&problem.d, weights.as_slice(), blocks, &[]);
    let y = stack(blocks);
    let w: Vec<f64> = blocks
        .iter()
        .flat_map(|yi| sub(&sub(&problem.d, &x0), yi))
        .collect();
    DualState::warm(&lifted, vec![y, w])
}

/// `d - sum_i lambda_i y_i - sum_e omega_e y_e`.
fn weighted_primal(d: &[f64], weights: &[f64], blocks: &[Vec<f64>], extra: &[(f64, &[f64])]) -> Vec<f64> {
    let mut x = d.to_vec();
    for (w, y) in weights.iter().zip(blocks) {
        axpy(-w, y, &mut x);
    }
    for (w, y) in extra {
        axpy(-w, y, &mut x);
    }
    x
}

/// `1/2 ||d - sum lambda_i y_i - sum omega_e y_e||^2 + sum lambda_i supp(y_i, C_i)
/// + sum omega_e supp(y_e, H_e)`: the lifted dual with the diagonal's block
/// minimized out.
fn product_objective(
    problem: &Problem,
    weights: &[f64],
    blocks: &[Vec<f64>],
    extra: &[(f64, &ExtraBlock)],
) -> Result<f64, GeometryError> {
    let refs: Vec<(f64, &[f64])> = extra.iter().map(|(w, e)| (*w, e.y.as_slice())).collect();
    let r = weighted_primal(&problem.d, weights, blocks, &refs);
    let mut h = 0.5 * crate::linalg::norm_sq(&r);
    for ((s, y), w) in problem.sets.iter().zip(blocks).zip(weights) {
        if y.iter().any(|v| *v != 0.0) {
            h += w * s.support(y)?;
        }
    }
    for (w, e) in extra {
        h += w * crate::dykstra::extra_support(e)?;
    }
    Ok(h)
}

struct LeafOutput {
    x: Vec<f64>,
    y: Vec<f64>,
    halfspace: Option<Halfspace>,
}

fn project_leaves(
    problem: &Problem,
    x: &[f64],
    blocks: &[Vec<f64>],
    parallel: bool,
) -> Result<Vec<LeafOutput>, GeometryError> {
    let one = |(set, y): (&ConvexSet, &Vec<f64>)| -> Result<LeafOutput, GeometryError> {
        let r = set.project(&add(x, y))?;
        Ok(LeafOutput { x: r.x, y: r.y, halfspace: r.halfspace })
    };
    if parallel {
        problem.sets.par_iter().zip(blocks.par_iter()).map(one).collect()
    } else {
        problem.sets.iter().zip(blocks.iter()).map(one).collect()
    }
}

fn start_state(problem: &Problem, weights: &Weights, start: DualState) -> Result<DualState, SolveError> {
    if weights.len() != problem.len() {
        return Err(ProblemError::Weights(format!("{} weights for {} sets", weights.len(), problem.len())).into());
    }
    let mut state = start;
    problem.check_blocks(&state.blocks)?;
    state.extra.clear();
    state.last_halfspaces.resize(problem.len(), None);
    state.primal = weighted_primal(&problem.d, weights.as_slice(), &state.blocks, &[]);
    Ok(state)
}

/// Simultaneous Dykstra: `x_i = P_i(x + y_i)`, `y_i = x + y_i - x_i` for all `i`
/// from the same `x`, then `x = sum_i lambda_i x_i`. Warm starts use
/// `x^(0) = d - sum_i lambda_i y_i^(0)`.
///
/// The trace's objective is the lifted dual at the current blocks.
pub fn simultaneous_dykstra_solve(
    problem: &Problem,
    weights: &Weights,
    start: DualState,
    options: &SolveOptions,
) -> Result<Solution, SolveError> {
    let mut state = start_state(problem, weights, start)?;
    let lambda = weights.as_slice();
    let h0 = product_objective(problem, lambda, &state.blocks, &[])?;
    let mut rec = Recorder::with_initial(h0, state.blocks.clone());
    for _ in 0..options.rule.max_sweeps {
        state.sweep += 1;
        let leaves = project_leaves(problem, &state.primal, &state.blocks, options.parallel)?;
        let mut x = vec![0.0; problem.dim()];
        let mut changes = Vec::with_capacity(leaves.len());
        for (i, leaf) in leaves.into_iter().enumerate() {
            axpy(lambda[i], &leaf.x, &mut x);
            changes.push(dist(&leaf.y, &state.blocks[i]));
            state.blocks[i] = leaf.y;
            state.last_halfspaces[i] = leaf.halfspace;
        }
        state.primal = x;
        let h = product_objective(problem, lambda, &state.blocks, &[])?;
        let coupling = dist(&weighted_primal(&problem.d, lambda, &state.blocks, &[]), &state.primal);
        let values = SweepValues { dual: h, extended: h, v_monitor: None, coupling_residual: Some(coupling) };
        if rec.record_values(problem, &state, values, changes, None, options)? {
            return rec.finish(state, true);
        }
    }
    rec.finish(state, false)
}

/// A node of an averaging tree.
#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Leaf { set: usize },
    /// Averages its children; with `shqp` set, follows the average by a
    /// projection onto halfspaces collected from its subtree.
    Internal { children: Vec<TreeNode>, shqp: bool },
}

/// Rooted averaging tree over the sets, with leaf weights.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeTopology {
    root: TreeNode,
    weights: Weights,
    buffer_capacity: usize,
}

impl TreeTopology {
    /// Checks that every set index `0..m` sits at exactly one leaf and that
    /// internal nodes have children.
    pub fn new(root: TreeNode, weights: Weights) -> Result<Self, ProblemError> {
        let m = weights.len();
        let mut seen = vec![false; m];
        fn walk(node: &TreeNode, seen: &mut [bool]) -> Result<(), ProblemError> {
            match node {
                TreeNode::Leaf { set } => {
                    let slot = seen
                        .get_mut(*set)
                        .ok_or_else(|| ProblemError::Weights(format!("leaf set {set} has no weight")))?;
                    if *slot {
                        return Err(ProblemError::Weights(format!("set {set} appears twice in the tree")));
                    }
                    *slot = true;
                    Ok(())
                }
                TreeNode::Internal { children, .. } => {
                    if children.is_empty() {
                        return Err(ProblemError::Weights("internal tree node without children".into()));
                    }
                    children.iter().try_for_each(|c| walk(c, seen))
                }
            }
        }
        walk(&root, &mut seen)?;
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(ProblemError::Weights(format!("set {i} is missing from the tree")));
        }
        Ok(Self { root, weights, buffer_capacity: crate::dykstra::HalfspaceBuffer::DEFAULT_CAPACITY })
    }

    /// One internal node holding every leaf: the simultaneous algorithm.
    pub fn flat(weights: Weights) -> Self {
        let children = (0..weights.len()).map(|set| TreeNode::Leaf { set }).collect();
        Self::new(TreeNode::Internal { children, shqp: false }, weights).expect("flat tree is valid")
    }

    /// Root over groups of leaves; `group_shqp[g]` flags group `g`.
    pub fn two_level(
        groups: Vec<Vec<usize>>,
        weights: Weights,
        group_shqp: &[bool],
        root_shqp: bool,
    ) -> Result<Self, ProblemError> {
        let children = groups
            .into_iter()
            .enumerate()
            .map(|(g, sets)| TreeNode::Internal {
                children: sets.into_iter().map(|set| TreeNode::Leaf { set }).collect(),
                shqp: group_shqp.get(g).copied().unwrap_or(false),
            })
            .collect();
        Self::new(TreeNode::Internal { children, shqp: root_shqp }, weights)
    }

    pub fn with_buffer_capacity(mut self, capacity: usize) -> Self {
        self.buffer_capacity = capacity;
        self
    }

    pub fn root(&self) -> &TreeNode {
        &self.root
    }

    pub fn weights(&self) -> &Weights {
        &self.weights
    }

    /// Sum of the leaf weights below `node`.
    pub fn node_weight(&self, node: &TreeNode) -> f64 {
        match node {
            TreeNode::Leaf { set } => self.weights.as_slice()[*set],
            TreeNode::Internal { children, .. } => children.iter().map(|c| self.node_weight(c)).sum(),
        }
    }

    /// Number of internal nodes with `shqp` set, in depth-first order.
    fn shqp_nodes(&self) -> Vec<f64> {
        let mut out = Vec::new();
        fn walk(t: &TreeTopology, node: &TreeNode, out: &mut Vec<f64>) {
            if let TreeNode::Internal { children, shqp } = node {
                for c in children {
                    walk(t, c, out);
                }
                if *shqp {
                    out.push(t.node_weight(node));
                }
            }
        }
        walk(self, &self.root, &mut out);
        out
    }

    /// Evaluates the bottom-up weighted averaging of `points` (one per set)
    /// without any halfspace steps.
    pub fn average(&self, points: &[Vec<f64>]) -> Vec<f64> {
        fn eval(t: &TreeTopology, node: &TreeNode, points: &[Vec<f64>]) -> (Vec<f64>, f64) {
            match node {
                TreeNode::Leaf { set } => (points[*set].clone(), t.weights.as_slice()[*set]),
                TreeNode::Internal { children, .. } => combine(children.iter().map(|c| eval(t, c, points)).collect()),
            }
        }
        eval(self, &self.root, points).0
    }
}

fn combine(parts: Vec<(Vec<f64>, f64)>) -> (Vec<f64>, f64) {
    let total: f64 = parts.iter().map(|(_, w)| w).sum();
    let mut avg = vec![0.0; parts[0].0.len()];
    for (p, w) in &parts {
        axpy(w / total, p, &mut avg);
    }
    (avg, total)
}

struct TreeRun<'a> {
    topology: &'a TreeTopology,
    leaves: Vec<Option<LeafOutput>>,
    extras: &'a mut [ExtraBlock],
    workspaces: &'a mut [Extra],
    changes: Vec<f64>,
    next_extra: usize,
}

impl TreeRun<'_> {
    /// Returns the node's output point, its weight, and the halfspaces its
    /// subtree produced this sweep.
    fn eval(&mut self, node: &TreeNode) -> Result<(Vec<f64>, f64, Vec<Halfspace>), SolveError> {
        match node {
            TreeNode::Leaf { set } => {
                let leaf = self.leaves[*set].as_ref().expect("each leaf evaluated once");
                let hs = leaf.halfspace.iter().cloned().collect();
                Ok((leaf.x.clone(), self.topology.weights.as_slice()[*set], hs))
            }
            TreeNode::Internal { children, shqp } => {
                let mut parts = Vec::with_capacity(children.len());
                let mut collected = Vec::new();
                for c in children {
                    let (p, w, hs) = self.eval(c)?;
                    parts.push((p, w));
                    collected.extend(hs);
                }
                let (mut point, weight) = combine(parts);
                if *shqp {
                    let e = self.next_extra;
                    self.next_extra += 1;
                    for h in &collected {
                        self.workspaces[e].buffer.insert(h.clone());
                    }
                    let (x, change) = extra_step(&mut self.extras[e], &mut self.workspaces[e], &point)?;
                    point = x;
                    self.changes.push(change);
                    if let Some(h) = &self.extras[e].halfspace {
                        collected.push(h.clone());
                    }
                }
                Ok((point, weight, collected))
            }
        }
    }
}

/// Multi-level simultaneous Dykstra: leaf projections from the common `x`,
/// then weighted averaging up the tree. Internal nodes flagged for SHQP follow
/// their average by a projection onto their own halfspace buffer (fed by
/// their subtree) intersected with their previous halfspace, carrying an
/// extra dual block weighted by the node's weight.
pub fn tree_dykstra_solve(
    problem: &Problem,
    topology: &TreeTopology,
    start: DualState,
    options: &SolveOptions,
) -> Result<Solution, SolveError> {
    let weights = &topology.weights;
    let mut state = start_state(problem, weights, start)?;
    let lambda = weights.as_slice();
    let node_weights = topology.shqp_nodes();
    state.extra = node_weights
        .iter()
        .enumerate()
        .map(|(e, _)| ExtraBlock { after: e, y: vec![0.0; problem.dim()], halfspace: None })
        .collect();
    let mut workspaces: Vec<Extra> = node_weights.iter().map(|_| Extra::new(topology.buffer_capacity)).collect();

    let objective = |state: &DualState| {
        let extra: Vec<(f64, &ExtraBlock)> = node_weights.iter().copied().zip(state.extra.iter()).collect();
        product_objective(problem, lambda, &state.blocks, &extra)
    };
    let mut rec = Recorder::with_initial(objective(&state)?, state.all_blocks());
    for _ in 0..options.rule.max_sweeps {
        state.sweep += 1;
        let leaves = project_leaves(problem, &state.primal, &state.blocks, options.parallel)?;
        let mut changes = Vec::with_capacity(problem.len() + node_weights.len());
        for (i, leaf) in leaves.iter().enumerate() {
            changes.push(dist(&leaf.y, &state.blocks[i]));
            state.blocks[i] = leaf.y.clone();
            state.last_halfspaces[i] = leaf.halfspace.clone();
        }
        let mut run = TreeRun {
            topology,
            leaves: leaves.into_iter().map(Some).collect(),
            extras: &mut state.extra,
            workspaces: &mut workspaces,
            changes: Vec::new(),
            next_extra: 0,
        };
        let (x, _, _) = run.eval(&topology.root)?;
        changes.extend(run.changes);
        state.primal = x;

        let h = objective(&state)?;
        let extra: Vec<(f64, &[f64])> =
            node_weights.iter().copied().zip(state.extra.iter().map(|e| e.y.as_slice())).collect();
        let coupling = dist(&weighted_primal(&problem.d, lambda, &state.blocks, &extra), &state.primal);
        let values = SweepValues { dual: h, extended: h, v_monitor: None, coupling_residual: Some(coupling) };
        if rec.record_values(problem, &state, values, changes, None, options)? {
            return rec.finish(state, true);
        }
    }
    rec.finish(state, false)
}
