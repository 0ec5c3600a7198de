//! Dykstra's algorithm as alternating minimization of the dual
//! `h(y_1, ..., y_m) = 1/2 ||y_1 + ... + y_m - d||^2 + sum_i supp(y_i, C_i)`.
//!
//! [`dykstra_solve`] is the cyclic algorithm with an arbitrary (warm) start;
//! [`extended_dykstra_solve`] adds extra blocks that project onto polyhedral
//! outer approximations built from supporting halfspaces, and [`shqp_refine`]
//! re-optimizes a group of blocks against their supporting halfspaces.

mod buffer;
pub(crate) mod extended;
mod plain;
mod refine;

use thiserror::Error;

pub use buffer::HalfspaceBuffer;
pub use extended::{extended_dykstra_solve, ExtendedOptions};
pub use plain::{dykstra_solve, dykstra_sweep};
pub use refine::{shqp_refine, RefineRecord};

use crate::geometry::{ConvexOperator, GeometryError, Halfspace};
use crate::linalg::{axpy, norm, sub, sum_blocks};
use crate::problem::{Problem, ProblemError};
use crate::qp::QpError;

/// An extra block `y_{m+1}` of the extended algorithm, with the halfspace
/// `H^k` its last step generated (`None` is the whole space).
#[derive(Debug, Clone, PartialEq)]
pub struct ExtraBlock {
    /// The step runs right after this many ordinary sets have been processed
    /// (tree runs: the index of the internal node owning the block).
    pub after: usize,
    pub y: Vec<f64>,
    pub halfspace: Option<Halfspace>,
}

/// Dual blocks plus the primal iterate they determine.
#[derive(Debug, Clone, PartialEq)]
pub struct DualState {
    pub blocks: Vec<Vec<f64>>,
    pub extra: Vec<ExtraBlock>,
    /// `d - sum of all blocks` (up to rounding in the last projection).
    pub primal: Vec<f64>,
    pub sweep: usize,
    /// Supporting halfspace from the latest projection onto each set.
    pub last_halfspaces: Vec<Option<Halfspace>>,
}

impl DualState {
    pub fn zeros<S: ConvexOperator>(problem: &Problem<S>) -> Self {
        Self {
            blocks: vec![vec![0.0; problem.dim()]; problem.len()],
            extra: Vec::new(),
            primal: problem.d.clone(),
            sweep: 0,
            last_halfspaces: vec![None; problem.len()],
        }
    }

    /// Warm start from arbitrary finite blocks; the primal start is
    /// `d - (y_1 + ... + y_m)`.
    pub fn warm<S: ConvexOperator>(problem: &Problem<S>, blocks: Vec<Vec<f64>>) -> Result<Self, ProblemError> {
        problem.check_blocks(&blocks)?;
        if blocks.iter().flatten().any(|v| !v.is_finite()) {
            return Err(ProblemError::NonFinite);
        }
        let mut s = Self::zeros(problem);
        s.blocks = blocks;
        s.primal = s.recovered_primal(&problem.d);
        Ok(s)
    }

    /// `d - sum_i y_i - sum_e y_e`.
    pub fn recovered_primal(&self, d: &[f64]) -> Vec<f64> {
        let mut x = sub(d, &sum_blocks(&self.blocks, d.len()));
        for e in &self.extra {
            axpy(-1.0, &e.y, &mut x);
        }
        x
    }

    /// Largest norm among all blocks, extra ones included.
    pub fn max_block_norm(&self) -> f64 {
        self.blocks
            .iter()
            .chain(self.extra.iter().map(|e| &e.y))
            .map(|b| norm(b))
            .fold(0.0, f64::max)
    }

    /// Ordinary blocks followed by extra blocks.
    pub fn all_blocks(&self) -> Vec<Vec<f64>> {
        self.blocks.iter().cloned().chain(self.extra.iter().map(|e| e.y.clone())).collect()
    }
}

/// When to stop. The algorithms themselves run forever.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoppingRule {
    /// Bound on `max_i dist(x, C_i)`.
    pub primal_tol: f64,
    /// Bound on `sum_i ||y_i^(k) - y_i^(k-1)||`; ignored once dual growth is flagged.
    pub dual_tol: f64,
    pub max_sweeps: usize,
}

impl Default for StoppingRule {
    fn default() -> Self {
        Self { primal_tol: 1e-8, dual_tol: 1e-10, max_sweeps: 100_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolveOptions {
    pub rule: StoppingRule,
    /// Keep every inner step (for the appendix monitors).
    pub record_inner: bool,
    /// Keep the dual blocks of every sweep.
    pub record_blocks: bool,
    /// Known `P_C(d)`; enables the `v` monitor column.
    pub reference: Option<Vec<f64>>,
    /// Run the independent projections of a product-space sweep on the rayon pool.
    pub parallel: bool,
}

impl SolveOptions {
    pub fn with_rule(rule: StoppingRule) -> Self {
        Self { rule, ..Self::default() }
    }
}

/// One projection inside a sweep: block `block` was replaced by `y`, and the
/// running primal point became `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerStep {
    pub sweep: usize,
    /// `0..m` for ordinary sets, `m + e` for extra block `e`.
    pub block: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub halfspace: Option<Halfspace>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub sweep: usize,
    /// `h` over the ordinary blocks.
    pub dual_objective: f64,
    /// `h^k`, including extra blocks with their current halfspaces.
    pub extended_objective: f64,
    /// `||y_i^(k) - y_i^(k-1)||`, ordinary blocks then extra blocks.
    pub block_changes: Vec<f64>,
    pub primal: Vec<f64>,
    pub primal_residual: f64,
    pub max_block_norm: f64,
    pub v_monitor: Option<f64>,
    pub refine: Option<RefineRecord>,
    pub blocks: Option<Vec<Vec<f64>>>,
    pub growth_flag: bool,
    /// Product-space runs: `||d - x - (weighted sum of blocks)||`, which is
    /// zero in exact arithmetic.
    pub coupling_residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolveTrace {
    /// `h^0` at the starting blocks.
    pub initial_objective: f64,
    /// Starting blocks, ordinary then extra.
    pub initial_blocks: Vec<Vec<f64>>,
    pub sweeps: Vec<SweepRecord>,
    pub inner: Vec<InnerStep>,
    pub growth_flagged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub state: DualState,
    pub trace: SolveTrace,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("stopping rule not met after {} sweeps", .0.state.sweep)]
    MaxSweepsExceeded(Box<Solution>),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Qp(#[from] QpError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("invalid option: {0}")]
    Options(String),
}

impl SolveError {
    /// The state reached before giving up, if the error carries one.
    pub fn partial(&self) -> Option<&Solution> {
        match self {
            SolveError::MaxSweepsExceeded(s) => Some(s),
            _ => None,
        }
    }
}

/// `1/2 ||sum_i y_i - d||^2 + sum_i supp(y_i, C_i)`, possibly `+inf`.
pub fn dual_objective<S: ConvexOperator>(problem: &Problem<S>, blocks: &[Vec<f64>]) -> Result<f64, GeometryError> {
    extended_dual_objective(problem, blocks, &[])
}

/// `h^k`: the dual objective with the extra blocks' support functions taken
/// with respect to their halfspaces `H^k`.
pub fn extended_dual_objective<S: ConvexOperator>(
    problem: &Problem<S>,
    blocks: &[Vec<f64>],
    extra: &[ExtraBlock],
) -> Result<f64, GeometryError> {
    let n = problem.dim();
    let mut r = sum_blocks(blocks, n);
    for e in extra {
        axpy(1.0, &e.y, &mut r);
    }
    axpy(-1.0, &problem.d, &mut r);
    let mut h = 0.5 * problem.metric.norm_sq(&r);
    for (s, y) in problem.sets.iter().zip(blocks) {
        h += s.support(y)?;
        if h == f64::INFINITY {
            return Ok(h);
        }
    }
    for e in extra {
        h += extra_support(e)?;
    }
    Ok(h)
}

pub(crate) fn extra_support(e: &ExtraBlock) -> Result<f64, GeometryError> {
    match &e.halfspace {
        Some(hs) => crate::geometry::ConvexSet::Halfspace(hs.clone()).support(&e.y),
        None => crate::geometry::ConvexSet::whole_space(e.y.len()).support(&e.y),
    }
}

/// `v(y) = 1/2 ||d - sum_i y_i - xbar||^2 + sum_i supp(y_i, C_i - xbar)`,
/// evaluated directly from its definition. Extra blocks contribute with their
/// halfspaces.
pub fn v_function<S: ConvexOperator>(
    problem: &Problem<S>,
    blocks: &[Vec<f64>],
    extra: &[ExtraBlock],
    xbar: &[f64],
) -> Result<f64, GeometryError> {
    let n = problem.dim();
    let metric = &problem.metric;
    let mut r = sub(&problem.d, xbar);
    for y in blocks.iter().chain(extra.iter().map(|e| &e.y)) {
        axpy(-1.0, y, &mut r);
    }
    let mut v = 0.5 * metric.norm_sq(&r);
    debug_assert_eq!(r.len(), n);
    for (s, y) in problem.sets.iter().zip(blocks) {
        v += s.support(y)? - metric.inner(y, xbar);
    }
    for e in extra {
        v += extra_support(e)? - metric.inner(&e.y, xbar);
    }
    Ok(v)
}

/// Objective-type values of one sweep, computed by the solver that owns the
/// problem's dual.
pub(crate) struct SweepValues {
    pub dual: f64,
    pub extended: f64,
    pub v_monitor: Option<f64>,
    pub coupling_residual: Option<f64>,
}

/// Shared per-sweep bookkeeping for the cyclic solvers.
pub(crate) struct Recorder {
    pub trace: SolveTrace,
    pub monitor: crate::diagnostics::BoundednessMonitor,
}

impl Recorder {
    pub fn new<S: ConvexOperator>(problem: &Problem<S>, state: &DualState) -> Result<Self, GeometryError> {
        let h0 = extended_dual_objective(problem, &state.blocks, &state.extra)?;
        Ok(Self::with_initial(h0, state.all_blocks()))
    }

    pub fn with_initial(initial_objective: f64, initial_blocks: Vec<Vec<f64>>) -> Self {
        Self {
            trace: SolveTrace { initial_objective, initial_blocks, ..SolveTrace::default() },
            monitor: crate::diagnostics::BoundednessMonitor::default(),
        }
    }

    /// Appends the record for the sweep just completed and reports whether the
    /// stopping rule is met.
    pub fn record<S: ConvexOperator>(
        &mut self,
        problem: &Problem<S>,
        state: &DualState,
        block_changes: Vec<f64>,
        refine: Option<RefineRecord>,
        options: &SolveOptions,
    ) -> Result<bool, GeometryError> {
        let dual = dual_objective(problem, &state.blocks)?;
        let extended = if state.extra.is_empty() {
            dual
        } else {
            extended_dual_objective(problem, &state.blocks, &state.extra)?
        };
        let v_monitor = match &options.reference {
            Some(xbar) => Some(v_function(problem, &state.blocks, &state.extra, xbar)?),
            None => None,
        };
        let values = SweepValues { dual, extended, v_monitor, coupling_residual: None };
        self.record_values(problem, state, values, block_changes, refine, options)
    }

    pub fn record_values<S: ConvexOperator>(
        &mut self,
        problem: &Problem<S>,
        state: &DualState,
        values: SweepValues,
        block_changes: Vec<f64>,
        refine: Option<RefineRecord>,
        options: &SolveOptions,
    ) -> Result<bool, GeometryError> {
        let primal_residual = problem.max_distance(&state.primal)?;
        let max_block_norm = state.max_block_norm();
        let flagged = self.monitor.push(max_block_norm);
        self.trace.growth_flagged |= flagged;
        let change: f64 = block_changes.iter().sum();
        self.trace.sweeps.push(SweepRecord {
            sweep: state.sweep,
            dual_objective: values.dual,
            extended_objective: values.extended,
            block_changes,
            primal: state.primal.clone(),
            primal_residual,
            max_block_norm,
            v_monitor: values.v_monitor,
            refine,
            blocks: options.record_blocks.then(|| state.all_blocks()),
            growth_flag: self.trace.growth_flagged,
            coupling_residual: values.coupling_residual,
        });
        let rule = &options.rule;
        Ok(primal_residual <= rule.primal_tol && (change <= rule.dual_tol || self.trace.growth_flagged))
    }

    pub fn finish(self, state: DualState, converged: bool) -> Result<Solution, SolveError> {
        let solution = Solution { state, trace: self.trace };
        if converged {
            Ok(solution)
        } else {
            Err(SolveError::MaxSweepsExceeded(Box::new(solution)))
        }
    }
}
