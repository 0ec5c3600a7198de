use super::{extended_dual_objective, DualState, SolveError};
use crate::geometry::{ConvexOperator, Halfspace};
use crate::linalg::axpy;
use crate::problem::{Metric, Problem};
use crate::qp::project_polyhedron;

/// Dual objective before and after one refinement step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineRecord {
    pub h_before: f64,
    pub h_after: f64,
}

/// Re-optimizes the blocks `y_i, i in J` with every other block held fixed,
/// replacing each `C_i` by an outer approximation `H_i` (one or more
/// halfspaces supporting `C_i`).
///
/// The subproblem is the projection of `d - sum_{i not in J} y_i` onto the
/// intersection of all given halfspaces; the new `y_i` collects the multiplier
/// terms of its own halfspaces. When every `H_i` is the supporting halfspace
/// generated together with the current `y_i`, the dual objective cannot increase.
///
/// `groups` lists `(i, H_i)`; an empty list leaves the state untouched.
pub fn shqp_refine<S: ConvexOperator>(
    problem: &Problem<S>,
    state: &mut DualState,
    groups: &[(usize, Vec<Halfspace>)],
) -> Result<RefineRecord, SolveError> {
    if problem.metric != Metric::Euclidean {
        return Err(SolveError::Options("refinement needs the Euclidean metric".into()));
    }
    let h_before = extended_dual_objective(problem, &state.blocks, &state.extra)?;
    let groups: Vec<&(usize, Vec<Halfspace>)> = groups.iter().filter(|(_, hs)| !hs.is_empty()).collect();
    if groups.is_empty() {
        return Ok(RefineRecord { h_before, h_after: h_before });
    }
    let mut in_j = vec![false; problem.len()];
    for (i, _) in &groups {
        if *i >= problem.len() || in_j[*i] {
            return Err(SolveError::Options(format!("bad or repeated refine index {i}")));
        }
        in_j[*i] = true;
    }

    let mut u = problem.d.clone();
    for (i, y) in state.blocks.iter().enumerate() {
        if !in_j[i] {
            axpy(-1.0, y, &mut u);
        }
    }
    for e in &state.extra {
        axpy(-1.0, &e.y, &mut u);
    }
    let all: Vec<Halfspace> = groups.iter().flat_map(|(_, hs)| hs.iter().cloned()).collect();
    let proj = project_polyhedron(&all, &u)?;

    let mut offset = 0;
    for (i, hs) in &groups {
        let mut y = vec![0.0; problem.dim()];
        for (k, h) in hs.iter().enumerate() {
            axpy(proj.multipliers[offset + k], h.normal(), &mut y);
        }
        offset += hs.len();
        state.blocks[*i] = y;
    }
    state.primal = proj.x;
    let h_after = extended_dual_objective(problem, &state.blocks, &state.extra)?;
    Ok(RefineRecord { h_before, h_after })
}

/// Refinement groups from the latest projections: every set whose last
/// projection moved contributes its supporting halfspace.
pub(crate) fn groups_from_last(state: &DualState) -> Vec<(usize, Vec<Halfspace>)> {
    state
        .last_halfspaces
        .iter()
        .enumerate()
        .filter_map(|(i, h)| h.clone().map(|h| (i, vec![h])))
        .collect()
}
