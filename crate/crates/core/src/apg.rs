//! Accelerated proximal gradient on the dual.
//!
//! The dual splits as `F(y) + P(y)` with `F(y) = 1/2 ||y_1 + ... + y_m - d||^2`
//! and `P(y) = sum_i supp(y_i, C_i)`. Every block of `grad F` equals
//! `sum_j y_j - d`, so `grad F` is Lipschitz with constant `L = m`, and the
//! proximal step decouples into one projection per set.

use rayon::prelude::*;
use thiserror::Error;

use crate::dykstra::{dual_objective, shqp_refine, DualState, SolveError};
use crate::geometry::{ConvexSet, GeometryError, Halfspace};
use crate::linalg::{axpy, dot, norm, norm_sq, scale, sub, sum_blocks};
use crate::problem::{Problem, ProblemError};
use crate::qp::QpError;

/// Minimizer of `t supp(., C) + 1/2 ||. - u||^2`, which is `u - t P_C(u / t)`.
pub fn prox_support(set: &ConvexSet, u: &[f64], t: f64) -> Result<Vec<f64>, GeometryError> {
    Ok(prox_with_halfspace(set, u, t)?.0)
}

fn prox_with_halfspace(set: &ConvexSet, u: &[f64], t: f64) -> Result<(Vec<f64>, Option<Halfspace>), GeometryError> {
    if !(t.is_finite() && t > 0.0) {
        return Err(GeometryError::NonFinite("prox step"));
    }
    let r = set.project(&scale(u, 1.0 / t))?;
    Ok((scale(&r.y, t), r.halfspace))
}

/// Positive root of `(1 - s) / s^2 = 1 / theta^2`.
pub fn theta_schedule_next(theta: f64) -> f64 {
    let t2 = theta * theta;
    // (sqrt(t^4 + 4 t^2) - t^2) / 2, rewritten to avoid cancellation for small theta
    2.0 * t2 / ((t2 * t2 + 4.0 * t2).sqrt() + t2)
}

/// Smallest `k` with `k >= sqrt(4 L / eps) * dist - 2`; after that iteration
/// the best objective value is within `eps` of the optimum.
pub fn apg_threshold(lipschitz: f64, dist: f64, eps: f64) -> usize {
    let k = (4.0 * lipschitz / eps).sqrt() * dist - 2.0;
    // rounding slack so that exact integers are not pushed up by one
    (k - 1e-9 * k.abs().max(1.0)).ceil().max(0.0) as usize
}

/// `F(y) = 1/2 ||sum_i y_i - d||^2`.
pub fn smooth_part(d: &[f64], blocks: &[Vec<f64>]) -> f64 {
    0.5 * norm_sq(&sub(&sum_blocks(blocks, d.len()), d))
}

/// `grad F(y)`: every block equals `sum_j y_j - d`.
pub fn smooth_gradient(d: &[f64], blocks: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let g = sub(&sum_blocks(blocks, d.len()), d);
    vec![g; blocks.len()]
}

fn block_dot(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| dot(x, y)).sum()
}

fn block_dist_sq(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| norm_sq(&sub(x, y))).sum()
}

/// `(1 - theta) a + theta b`, blockwise.
fn blend(a: &[Vec<f64>], b: &[Vec<f64>], theta: f64) -> Vec<Vec<f64>> {
    a.iter()
        .zip(b)
        .map(|(x, z)| x.iter().zip(z).map(|(x, z)| (1.0 - theta) * x + theta * z).collect())
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApgOptions {
    pub max_iter: usize,
    /// Stop once the primal candidate is within this distance of every set
    /// and the proximal gradient step from the best blocks is shorter than
    /// this (times `L`). `None` runs exactly `max_iter` iterations.
    pub tolerance: Option<f64>,
    /// Try a refinement of each hat iterate over the latest supporting halfspaces.
    pub shqp_improve: bool,
    /// Compute the per-set prox steps on the rayon pool.
    pub parallel: bool,
}

impl Default for ApgOptions {
    fn default() -> Self {
        Self { max_iter: 10_000, tolerance: Some(1e-8), shqp_improve: false, parallel: false }
    }
}

/// Iteration `k`, which produces `x_{k+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ApgRecord {
    pub k: usize,
    pub theta: f64,
    /// `h(x_hat_{k+1})`.
    pub h_hat: f64,
    /// `h(x_{k+1})`.
    pub h_next: f64,
    /// Right side of the acceptance inequality at `x_hat_{k+1}`.
    pub rhs: f64,
    /// `Some(accepted)` when a refinement was tried.
    pub refined: Option<bool>,
    /// `min_{i <= k+1} h(x_i)`.
    pub best_h: f64,
    /// `max_i dist(d - sum of best blocks, C_i)`.
    pub primal_residual: f64,
    /// `||x_{k+1,i} - x_{k,i}||` per block.
    pub block_changes: Vec<f64>,
    /// `max_i ||x_{k+1,i}||`.
    pub max_block_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ApgTrace {
    /// `h(x_0)`.
    pub initial_objective: f64,
    pub iterations: Vec<ApgRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApgSolution {
    /// Blocks with the smallest dual objective seen.
    pub blocks: Vec<Vec<f64>>,
    pub best_h: f64,
    /// `d - sum` of the best blocks.
    pub primal: Vec<f64>,
    pub trace: ApgTrace,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ApgError {
    #[error("tolerance not met after {} iterations", .0.trace.iterations.len())]
    MaxIterationsExceeded(Box<ApgSolution>),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Qp(#[from] QpError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("starting blocks have infinite dual objective")]
    InfeasibleStart,
    #[error("invalid option: {0}")]
    Options(String),
}

impl ApgError {
    pub fn partial(&self) -> Option<&ApgSolution> {
        match self {
            ApgError::MaxIterationsExceeded(s) => Some(s),
            _ => None,
        }
    }
}

impl From<SolveError> for ApgError {
    fn from(e: SolveError) -> Self {
        match e {
            SolveError::Geometry(g) => ApgError::Geometry(g),
            SolveError::Qp(q) => ApgError::Qp(q),
            SolveError::Problem(p) => ApgError::Problem(p),
            other => ApgError::Options(other.to_string()),
        }
    }
}

/// `L ||prox(y - grad/L) - y||`, zero exactly at dual minimizers.
fn stationarity(problem: &Problem, blocks: &[Vec<f64>]) -> Result<f64, ApgError> {
    let lip = problem.len() as f64;
    let grad = smooth_gradient(&problem.d, blocks);
    let mut sq = 0.0;
    for ((set, y), g) in problem.sets.iter().zip(blocks).zip(&grad) {
        let mut u = y.clone();
        axpy(-1.0 / lip, g, &mut u);
        let (p, _) = prox_with_halfspace(set, &u, 1.0 / lip)?;
        sq += norm_sq(&sub(&p, y));
    }
    Ok(lip * sq.sqrt())
}

/// APG from `x_0 = z_0 = start` with `theta_0 = 1` and `L = m`.
pub fn apg_solve(problem: &Problem, start: Vec<Vec<f64>>, options: &ApgOptions) -> Result<ApgSolution, ApgError> {
    problem.check_blocks(&start)?;
    let m = problem.len();
    let lip = m as f64;
    let d = &problem.d;

    let h0 = dual_objective(problem, &start)?;
    if !h0.is_finite() {
        return Err(ApgError::InfeasibleStart);
    }
    let mut x = start.clone();
    let mut z = start;
    let mut theta = 1.0;
    let mut best = x.clone();
    let mut best_h = h0;
    let mut trace = ApgTrace { initial_objective: h0, iterations: Vec::new() };

    for k in 0..options.max_iter {
        let y = blend(&x, &z, theta);
        let grad = smooth_gradient(d, &y);
        let t = 1.0 / (theta * lip);
        let step = |(set, (zi, gi)): (&ConvexSet, (&Vec<f64>, &Vec<f64>))| {
            let mut u = zi.clone();
            axpy(-t, gi, &mut u);
            prox_with_halfspace(set, &u, t)
        };
        let pairs: Vec<(Vec<f64>, Option<Halfspace>)> = if options.parallel {
            problem.sets.par_iter().zip(z.par_iter().zip(grad.par_iter())).map(step).collect::<Result<_, _>>()?
        } else {
            problem.sets.iter().zip(z.iter().zip(grad.iter())).map(step).collect::<Result<_, _>>()?
        };
        let (z_next, halfspaces): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
        let x_hat = blend(&x, &z_next, theta);

        let h_hat = dual_objective(problem, &x_hat)?;
        let support = h_hat - smooth_part(d, &x_hat);
        let diff: Vec<Vec<f64>> = x_hat.iter().zip(&y).map(|(a, b)| sub(a, b)).collect();
        let rhs = smooth_part(d, &y) + block_dot(&grad, &diff) + support + 0.5 * lip * block_dist_sq(&x_hat, &y);

        let mut next = x_hat.clone();
        let mut h_next = h_hat;
        let mut refined = None;
        if options.shqp_improve {
            let mut state = DualState::warm(problem, x_hat.clone())?;
            state.last_halfspaces = halfspaces;
            let groups: Vec<(usize, Vec<Halfspace>)> = state
                .last_halfspaces
                .iter()
                .enumerate()
                .filter_map(|(i, h)| h.clone().map(|h| (i, vec![h])))
                .collect();
            let r = shqp_refine(problem, &mut state, &groups)?;
            let h_ref = dual_objective(problem, &state.blocks)?;
            let accept = r.h_after.is_finite() && h_ref <= rhs && h_ref <= h_hat;
            if accept {
                next = state.blocks;
                h_next = h_ref;
            }
            refined = Some(accept);
        }
        if h_next < best_h {
            best_h = h_next;
            best = next.clone();
        }
        let primal = sub(d, &sum_blocks(&best, problem.dim()));
        let primal_residual = problem.max_distance(&primal)?;
        let block_changes = next.iter().zip(&x).map(|(a, b)| norm(&sub(a, b))).collect();
        let max_block_norm = next.iter().map(|y| norm(y)).fold(0.0, f64::max);
        trace.iterations.push(ApgRecord {
            k,
            theta,
            h_hat,
            h_next,
            rhs,
            refined,
            best_h,
            primal_residual,
            block_changes,
            max_block_norm,
        });

        x = next;
        z = z_next;
        theta = theta_schedule_next(theta);
        let done = match options.tolerance {
            Some(tol) if primal_residual <= tol => stationarity(problem, &best)? <= tol,
            _ => false,
        };
        if done {
            return Ok(ApgSolution { blocks: best, best_h, primal, trace });
        }
    }
    let primal = sub(d, &sum_blocks(&best, problem.dim()));
    let solution = ApgSolution { blocks: best, best_h, primal, trace };
    if options.tolerance.is_some() {
        Err(ApgError::MaxIterationsExceeded(Box::new(solution)))
    } else {
        Ok(solution)
    }
}
