use super::{DualState, InnerStep, Recorder, SolveError, SolveOptions, Solution};
use crate::geometry::{ConvexOperator, GeometryError};
use crate::linalg::{add, sub};
use crate::problem::Problem;

/// One cycle `i = 1..m` of `z_i = x_{i-1} + y_i`, `x_i = P_i(z_i)`, `y_i = z_i - x_i`,
/// starting from `x_0 = state.primal`. Returns `||y_i^new - y_i^old||` per block.
pub fn dykstra_sweep<S: ConvexOperator>(
    problem: &Problem<S>,
    state: &mut DualState,
) -> Result<Vec<f64>, GeometryError> {
    sweep(problem, state, None)
}

pub(super) fn sweep<S: ConvexOperator>(
    problem: &Problem<S>,
    state: &mut DualState,
    mut inner: Option<&mut Vec<InnerStep>>,
) -> Result<Vec<f64>, GeometryError> {
    state.sweep += 1;
    let mut x = std::mem::take(&mut state.primal);
    let mut changes = Vec::with_capacity(problem.len());
    for (i, set) in problem.sets.iter().enumerate() {
        let z = add(&x, &state.blocks[i]);
        let r = set.project(&z)?;
        changes.push(problem.metric.norm_sq(&sub(&r.y, &state.blocks[i])).sqrt());
        x = r.x;
        state.blocks[i] = r.y;
        state.last_halfspaces[i] = r.halfspace;
        if let Some(steps) = inner.as_deref_mut() {
            steps.push(InnerStep {
                sweep: state.sweep,
                block: i,
                x: x.clone(),
                y: state.blocks[i].clone(),
                halfspace: state.last_halfspaces[i].clone(),
            });
        }
    }
    state.primal = x;
    Ok(changes)
}

/// Cyclic Dykstra from an arbitrary starting dual state (zero or warm).
///
/// Stops once the primal iterate is within `primal_tol` of every set and the
/// blocks have settled (or their growth has been flagged, in which case no
/// dual limit exists to wait for). On running out of sweeps the partial
/// solution is returned inside [`SolveError::MaxSweepsExceeded`].
pub fn dykstra_solve<S: ConvexOperator>(
    problem: &Problem<S>,
    start: DualState,
    options: &SolveOptions,
) -> Result<Solution, SolveError> {
    let mut state = start;
    problem.check_blocks(&state.blocks)?;
    state.extra.clear();
    state.last_halfspaces.resize(problem.len(), None);
    state.primal = state.recovered_primal(&problem.d);
    let mut rec = Recorder::new(problem, &state)?;
    for _ in 0..options.rule.max_sweeps {
        let inner = options.record_inner.then_some(&mut rec.trace.inner);
        let changes = sweep(problem, &mut state, inner)?;
        if rec.record(problem, &state, changes, None, options)? {
            return rec.finish(state, true);
        }
    }
    rec.finish(state, false)
}
