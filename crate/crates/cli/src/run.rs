use std::fmt::Write as _;

use bestapprox::apg::{apg_solve, apg_threshold, ApgError, ApgOptions, ApgSolution};
use bestapprox::diagnostics::optimal_value;
use bestapprox::dykstra::{
    dykstra_solve, extended_dykstra_solve, DualState, ExtendedOptions, Solution, SolveError, SolveOptions,
    StoppingRule,
};
use bestapprox::product_space::{simultaneous_dykstra_solve, tree_dykstra_solve};
use serde::Serialize;

use crate::load::Instance;
use crate::schema::{Algorithm, ShqpSchedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    ToleranceNotMet,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApgSummary {
    /// Smallest dual objective seen and the iterate index that attained it.
    pub best_h: f64,
    pub best_iterate: usize,
    /// Iteration count after which the best value is within `epsilon` of the optimum.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold_index: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// `dual_reference` when the file gives a dual minimizer, otherwise
    /// `best_iterate` (the distance is then only an estimate).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold_distance_from: Option<&'static str>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub algorithm: &'static str,
    pub status: Status,
    pub sweeps: usize,
    pub primal: Vec<f64>,
    pub h: f64,
    pub h_k: f64,
    pub primal_residual: f64,
    pub max_dual_norm: f64,
    pub growth_flagged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub apg: Option<ApgSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub status: Status,
    /// CSV with header `sweep,h,h_k,primal_residual,max_dual_norm,v_monitor,dy_1,...`.
    pub trace: String,
    pub report: Report,
}

struct Row<'a> {
    sweep: usize,
    h: f64,
    h_k: f64,
    primal_residual: f64,
    max_dual_norm: f64,
    v: Option<f64>,
    changes: &'a [f64],
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv(rows: &[Row]) -> String {
    let width = rows.iter().map(|r| r.changes.len()).max().unwrap_or(0);
    let mut out = String::from("sweep,h,h_k,primal_residual,max_dual_norm,v_monitor");
    for i in 1..=width {
        let _ = write!(out, ",dy_{i}");
    }
    out.push('\n');
    for r in rows {
        let _ = write!(
            out,
            "{},{},{},{},{},{}",
            r.sweep,
            fmt(r.h),
            fmt(r.h_k),
            fmt(r.primal_residual),
            fmt(r.max_dual_norm),
            r.v.map(fmt).unwrap_or_default()
        );
        for c in r.changes {
            let _ = write!(out, ",{}", fmt(*c));
        }
        out.push('\n');
    }
    out
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Runs the selected solver. Solver failures other than an unmet tolerance
/// are returned as errors.
pub fn run(instance: &Instance) -> Result<RunOutput, String> {
    match instance.algorithm {
        Algorithm::Apg => run_apg(instance),
        _ => run_cyclic(instance),
    }
}

fn run_cyclic(instance: &Instance) -> Result<RunOutput, String> {
    let p = &instance.problem;
    let c = &instance.config;
    let mut options = SolveOptions::with_rule(StoppingRule {
        primal_tol: c.tolerance,
        dual_tol: c.dual_tolerance,
        max_sweeps: c.max_sweeps,
    });
    options.reference = instance.reference.clone();
    let start = DualState::warm(p, c.warmstart.clone()).map_err(|e| e.to_string())?;
    let result = match instance.algorithm {
        Algorithm::Dykstra => dykstra_solve(p, start, &options),
        Algorithm::Extended => {
            let ext = ExtendedOptions {
                buffer_capacity: c.buffer_capacity,
                shqp_refine: c.shqp == ShqpSchedule::Every,
                ..ExtendedOptions::default()
            };
            extended_dykstra_solve(p, start, &ext, &options)
        }
        Algorithm::Simultaneous => simultaneous_dykstra_solve(p, &instance.weights, start, &options),
        Algorithm::Tree => tree_dykstra_solve(p, &instance.tree, start, &options),
        Algorithm::Apg => unreachable!("dispatched separately"),
    };
    let (solution, status): (Solution, Status) = match result {
        Ok(s) => (s, Status::Converged),
        Err(SolveError::MaxSweepsExceeded(s)) => (*s, Status::ToleranceNotMet),
        Err(e) => return Err(e.to_string()),
    };
    let rows: Vec<Row> = solution
        .trace
        .sweeps
        .iter()
        .map(|r| Row {
            sweep: r.sweep,
            h: r.dual_objective,
            h_k: r.extended_objective,
            primal_residual: r.primal_residual,
            max_dual_norm: r.max_block_norm,
            v: r.v_monitor,
            changes: &r.block_changes,
        })
        .collect();
    let last = solution.trace.sweeps.last();
    let h_k = last.map_or(solution.trace.initial_objective, |r| r.extended_objective);
    let primal = solution.state.primal.clone();
    let report = Report {
        algorithm: instance.algorithm.name(),
        status,
        sweeps: solution.trace.sweeps.len(),
        h: last.map_or(solution.trace.initial_objective, |r| r.dual_objective),
        h_k,
        primal_residual: match last {
            Some(r) => r.primal_residual,
            None => p.max_distance(&primal).map_err(|e| e.to_string())?,
        },
        max_dual_norm: solution.state.max_block_norm(),
        growth_flagged: solution.trace.growth_flagged,
        gap: instance.reference.as_ref().map(|x| h_k - optimal_value(&p.d, x)),
        reference_error: instance.reference.as_ref().map(|x| distance(&primal, x)),
        apg: None,
        primal,
    };
    Ok(RunOutput { status, trace: csv(&rows), report })
}

fn run_apg(instance: &Instance) -> Result<RunOutput, String> {
    let p = &instance.problem;
    let c = &instance.config;
    let options = ApgOptions {
        max_iter: c.max_sweeps,
        tolerance: Some(c.tolerance),
        shqp_improve: c.shqp == ShqpSchedule::Every,
        parallel: false,
    };
    let (solution, status): (ApgSolution, Status) = match apg_solve(p, c.warmstart.clone(), &options) {
        Ok(s) => (s, Status::Converged),
        Err(ApgError::MaxIterationsExceeded(s)) => (*s, Status::ToleranceNotMet),
        Err(e) => return Err(e.to_string()),
    };
    let its = &solution.trace.iterations;
    let rows: Vec<Row> = its
        .iter()
        .map(|r| Row {
            sweep: r.k + 1,
            h: r.h_next,
            h_k: r.h_hat,
            primal_residual: r.primal_residual,
            max_dual_norm: r.max_block_norm,
            v: None,
            changes: &r.block_changes,
        })
        .collect();
    // index i of x_i attaining the running minimum; 0 is the start
    let best_iterate = its
        .iter()
        .filter(|r| r.h_next == r.best_h)
        .map(|r| r.k + 1)
        .last()
        .unwrap_or(0);
    let block_distance = |blocks: &[Vec<f64>]| {
        blocks
            .iter()
            .zip(&c.warmstart)
            .map(|(a, b)| distance(a, b).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let (threshold_index, from) = match c.epsilon {
        Some(eps) => {
            let (dist, from) = match &instance.dual_reference {
                Some(y) => (block_distance(y), "dual_reference"),
                None => (block_distance(&solution.blocks), "best_iterate"),
            };
            (Some(apg_threshold(p.len() as f64, dist, eps)), Some(from))
        }
        None => (None, None),
    };
    let report = Report {
        algorithm: instance.algorithm.name(),
        status,
        sweeps: its.len(),
        h: solution.best_h,
        h_k: its.last().map_or(solution.trace.initial_objective, |r| r.h_hat),
        primal_residual: p.max_distance(&solution.primal).map_err(|e| e.to_string())?,
        max_dual_norm: solution.blocks.iter().map(|y| y.iter().map(|v| v * v).sum::<f64>().sqrt()).fold(0.0, f64::max),
        growth_flagged: false,
        gap: instance.reference.as_ref().map(|x| solution.best_h - optimal_value(&p.d, x)),
        reference_error: instance.reference.as_ref().map(|x| distance(&solution.primal, x)),
        apg: Some(ApgSummary {
            best_h: solution.best_h,
            best_iterate,
            threshold_index,
            epsilon: c.epsilon,
            threshold_distance_from: from,
        }),
        primal: solution.primal.clone(),
    };
    Ok(RunOutput { status, trace: csv(&rows), report })
}
