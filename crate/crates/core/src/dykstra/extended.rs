use super::buffer::HalfspaceBuffer;
use super::refine::{groups_from_last, shqp_refine};
use super::{DualState, ExtraBlock, InnerStep, Recorder, SolveError, SolveOptions, Solution};
use crate::geometry::{supporting_halfspace, ConvexSet, Halfspace};
use crate::linalg::{add, dist, sub};
use crate::problem::{Metric, Problem};
use crate::qp::project_polyhedron_warm;

#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedOptions {
    /// Halfspaces kept per extra block, besides the block's own `H^{k-1}`.
    pub buffer_capacity: usize,
    /// Each extra block runs after this many ordinary sets; empty means a
    /// single block at the end of the sweep.
    pub insertion_points: Vec<usize>,
    /// Run one refinement per sweep over the sets whose last projection moved.
    pub shqp_refine: bool,
}

impl Default for ExtendedOptions {
    fn default() -> Self {
        Self {
            buffer_capacity: HalfspaceBuffer::DEFAULT_CAPACITY,
            insertion_points: Vec::new(),
            shqp_refine: false,
        }
    }
}

pub(crate) struct Extra {
    pub buffer: HalfspaceBuffer,
    /// whether `H^{k-1}` carried a positive multiplier last time
    pub previous_active: bool,
}

impl Extra {
    pub fn new(capacity: usize) -> Self {
        Self { buffer: HalfspaceBuffer::new(capacity), previous_active: false }
    }
}

/// Dykstra with extra blocks that project onto `C^k = H^{k-1} ∩ (buffered
/// supporting halfspaces)`, a polyhedral superset of `C`.
///
/// The extra blocks start at zero with `H^0` the whole space; the starting
/// state's ordinary blocks may be any warm start. With capacity 0 every
/// `C^k` is the whole space and the iterates are those of [`super::dykstra_solve`].
pub fn extended_dykstra_solve(
    problem: &Problem<ConvexSet>,
    start: DualState,
    ext: &ExtendedOptions,
    options: &SolveOptions,
) -> Result<Solution, SolveError> {
    if problem.metric != Metric::Euclidean {
        return Err(SolveError::Options("extended Dykstra needs the Euclidean metric".into()));
    }
    let m = problem.len();
    let mut points = if ext.insertion_points.is_empty() { vec![m] } else { ext.insertion_points.clone() };
    points.sort_unstable();
    if let Some(bad) = points.iter().find(|p| **p == 0 || **p > m) {
        return Err(SolveError::Options(format!("insertion point {bad} outside 1..={m}")));
    }

    let mut state = start;
    problem.check_blocks(&state.blocks)?;
    state.last_halfspaces.resize(m, None);
    state.extra = points
        .iter()
        .map(|&after| ExtraBlock { after, y: vec![0.0; problem.dim()], halfspace: None })
        .collect();
    state.primal = state.recovered_primal(&problem.d);
    let mut extras: Vec<Extra> = points
        .iter()
        .map(|_| Extra::new(ext.buffer_capacity))
        .collect();

    let mut rec = Recorder::new(problem, &state)?;
    for _ in 0..options.rule.max_sweeps {
        state.sweep += 1;
        let mut x = std::mem::take(&mut state.primal);
        let mut changes = vec![0.0; m + points.len()];
        for (i, set) in problem.sets.iter().enumerate() {
            let z = add(&x, &state.blocks[i]);
            let r = set.project(&z)?;
            changes[i] = dist(&r.y, &state.blocks[i]);
            x = r.x;
            state.blocks[i] = r.y;
            state.last_halfspaces[i] = r.halfspace;
            if options.record_inner {
                rec.trace.inner.push(InnerStep {
                    sweep: state.sweep,
                    block: i,
                    x: x.clone(),
                    y: state.blocks[i].clone(),
                    halfspace: state.last_halfspaces[i].clone(),
                });
            }
            if let Some(h) = &state.last_halfspaces[i] {
                for (e, block) in state.extra.iter().enumerate() {
                    if i < block.after {
                        extras[e].buffer.insert(h.clone());
                    }
                }
            }
            for e in 0..points.len() {
                if state.extra[e].after != i + 1 {
                    continue;
                }
                let (x_new, change) = extra_step(&mut state.extra[e], &mut extras[e], &x)?;
                x = x_new;
                changes[m + e] = change;
                if options.record_inner {
                    rec.trace.inner.push(InnerStep {
                        sweep: state.sweep,
                        block: m + e,
                        x: x.clone(),
                        y: state.extra[e].y.clone(),
                        halfspace: state.extra[e].halfspace.clone(),
                    });
                }
            }
        }
        state.primal = x;
        let refine = if ext.shqp_refine {
            let groups = groups_from_last(&state);
            Some(shqp_refine(problem, &mut state, &groups)?)
        } else {
            None
        };
        if rec.record(problem, &state, changes, refine, options)? {
            return rec.finish(state, true);
        }
    }
    rec.finish(state, false)
}

/// `z = x + y`, project onto `C^k`, `y = z - P(z)`, `H^k` from the projection.
pub(crate) fn extra_step(block: &mut ExtraBlock, extra: &mut Extra, x: &[f64]) -> Result<(Vec<f64>, f64), SolveError> {
    let z = add(x, &block.y);
    let mut list: Vec<Halfspace> = Vec::with_capacity(extra.buffer.len() + 1);
    let mut warm = Vec::new();
    let shift = usize::from(block.halfspace.is_some());
    if let Some(h) = &block.halfspace {
        list.push(h.clone());
        if extra.previous_active {
            warm.push(0);
        }
    }
    list.extend(extra.buffer.halfspaces().cloned());
    warm.extend(extra.buffer.active_indices().into_iter().map(|i| i + shift));

    let projected = if list.is_empty() {
        z.clone()
    } else {
        let p = project_polyhedron_warm(&list, &z, &warm)?;
        extra.previous_active = shift == 1 && p.active_set.first() == Some(&0);
        let buffer_active: Vec<usize> =
            p.active_set.iter().filter(|&&j| j >= shift).map(|&j| j - shift).collect();
        extra.buffer.mark_active(&buffer_active);
        p.x
    };
    let (x_new, y_new, h_new) = match supporting_halfspace(&z, &projected) {
        Some(h) => {
            let y = sub(&z, &projected);
            (projected, y, Some(h))
        }
        None => (z, vec![0.0; x.len()], None),
    };
    let change = dist(&y_new, &block.y);
    block.y = y_new;
    if let Some(h) = &h_new {
        extra.buffer.insert(h.clone());
    }
    block.halfspace = h_new;
    Ok((x_new, change))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dykstra::{dykstra_solve, StoppingRule};
    use crate::qp::project_polyhedron;

    fn figure_one(d: Vec<f64>) -> Problem {
        Problem::new(
            d,
            vec![
                ConvexSet::hyperplane(vec![0.0, 1.0], 0.0).unwrap(),
                ConvexSet::halfspace(vec![0.01, -1.0], 0.0).unwrap(),
            ],
        )
        .unwrap()
    }

    #[test]
    fn capacity_zero_matches_plain() {
        let p = figure_one(vec![1.0, 1.0]);
        let rule = StoppingRule { max_sweeps: 50, ..StoppingRule::default() };
        let opts = SolveOptions::with_rule(rule);
        let plain = dykstra_solve(&p, DualState::zeros(&p), &opts).unwrap_err();
        let ext = ExtendedOptions { buffer_capacity: 0, ..ExtendedOptions::default() };
        let extended = extended_dykstra_solve(&p, DualState::zeros(&p), &ext, &opts).unwrap_err();
        let (a, b) = (plain.partial().unwrap(), extended.partial().unwrap());
        for (ra, rb) in a.trace.sweeps.iter().zip(&b.trace.sweeps) {
            assert!(dist(&ra.primal, &rb.primal) <= 1e-12);
        }
    }

    #[test]
    fn figure_one_converges_fast() {
        let p = figure_one(vec![1.0, 1.0]);
        let sol = extended_dykstra_solve(&p, DualState::zeros(&p), &ExtendedOptions::default(), &SolveOptions::default())
            .unwrap();
        assert!(sol.state.sweep <= 5, "{} sweeps", sol.state.sweep);
        assert!(dist(&sol.state.primal, &[0.0, 0.0]) <= 1e-8);
    }

    #[test]
    fn polyhedral_problem_is_solved_once_faces_are_buffered() {
        let hs = vec![
            Halfspace::new(vec![1.0, 0.3], 0.5).unwrap(),
            Halfspace::new(vec![-0.2, 1.0], 0.4).unwrap(),
            Halfspace::new(vec![1.0, 1.0], 0.6).unwrap(),
        ];
        let d = vec![2.0, 3.0];
        let p = Problem::new(d.clone(), hs.iter().cloned().map(ConvexSet::Halfspace).collect()).unwrap();
        let oracle = project_polyhedron(&hs, &d).unwrap().x;
        // every face moves the iterate in sweep 1, so the refinement sees all of them
        let ext = ExtendedOptions { shqp_refine: true, ..ExtendedOptions::default() };
        let sol = extended_dykstra_solve(&p, DualState::zeros(&p), &ext, &SolveOptions::default()).unwrap();
        assert!(dist(&sol.trace.sweeps[0].primal, &oracle) <= 1e-12);
        assert!(dist(&sol.state.primal, &oracle) <= 1e-12);
    }

    #[test]
    fn bad_insertion_point() {
        let p = figure_one(vec![1.0, 1.0]);
        let ext = ExtendedOptions { insertion_points: vec![3], ..ExtendedOptions::default() };
        assert!(matches!(
            extended_dykstra_solve(&p, DualState::zeros(&p), &ext, &SolveOptions::default()),
            Err(SolveError::Options(_))
        ));
    }
}
