//! Runtime certificates for the convergence theory: rate bounds for sequences
//! obeying `a_{k-1} >= a_k + alpha a_k^2`, their instantiation for alternating
//! minimization, optimality gaps, and monitors for dual growth and for the
//! Lyapunov-type quantity behind the warm-started convergence proof.

use thiserror::Error;

use crate::dykstra::{extra_support, ExtraBlock, SolveTrace};
use crate::geometry::{ConvexOperator, GeometryError};
use crate::linalg::{dist, norm_sq, sub};
use crate::problem::Problem;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("the bound needs k >= 2, got {0}")]
    IndexTooSmall(usize),
    #[error("alpha must be positive, got {0}")]
    BadAlpha(f64),
    #[error("h* = {h_star} lies above the objective at sweep {sweep} (a_k = {gap:e})")]
    InconsistentOptimum { sweep: usize, h_star: f64, gap: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// `1.5 / (alpha k)` together with whether the hypotheses
/// `a_1 <= 1.5/alpha`, `a_2 <= 1.5/(2 alpha)` were met.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BtvBound {
    pub value: f64,
    pub hypotheses_hold: bool,
}

pub fn rate_bound_btv(a1: f64, a2: f64, alpha: f64, k: usize) -> BtvBound {
    BtvBound {
        value: 1.5 / (alpha * k as f64),
        hypotheses_hold: a1 <= 1.5 / alpha && a2 <= 1.5 / (2.0 * alpha),
    }
}

/// `max{ (1/2)^((k-1)/2) a_0, 4 / (alpha (k-1)) }`, valid for `k >= 2`.
pub fn rate_bound_bam(a0: f64, alpha: f64, k: usize) -> Result<f64, DiagnosticsError> {
    if k < 2 {
        return Err(DiagnosticsError::IndexTooSmall(k));
    }
    if !(alpha > 0.0) {
        return Err(DiagnosticsError::BadAlpha(alpha));
    }
    let k = k as f64;
    Ok((0.5_f64.powf((k - 1.0) / 2.0) * a0).max(4.0 / (alpha * (k - 1.0))))
}

/// Smallest integer `k` with `k >= max{2/ln2 (ln a_0 + ln(1/eps)), 4/(alpha eps)} + 1`;
/// from there on `a_k <= eps`.
pub fn bam_threshold(a0: f64, alpha: f64, eps: f64) -> Result<usize, DiagnosticsError> {
    if !(alpha > 0.0) {
        return Err(DiagnosticsError::BadAlpha(alpha));
    }
    let geometric = if a0 > 0.0 {
        2.0 / std::f64::consts::LN_2 * (a0.ln() + (1.0 / eps).ln())
    } else {
        f64::NEG_INFINITY
    };
    let k = geometric.max(4.0 / (alpha * eps)) + 1.0;
    Ok(k.ceil().max(0.0) as usize)
}

/// Which constant the alternating-minimization rate uses: `(m-1)^3` for plain
/// Dykstra, `m^3` when an extra halfspace block is present.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateVariant {
    Plain,
    Extended,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateCertificate {
    pub alpha: f64,
    /// `a_k = h_k - h*`, from `k = 0`.
    pub a: Vec<f64>,
    /// Recurrence `a_{k-1} >= a_k + alpha a_k^2` at each `k >= 1` (index `k - 1`).
    pub recurrence: Vec<bool>,
    /// Closed-form envelopes at each `k >= 1` (index `k - 1`); the smaller of the
    /// `1/k` form and, for `k >= 2`, the geometric/`1/(k-1)` form.
    pub envelope: Vec<f64>,
    pub envelope_ok: Vec<bool>,
    /// Single-block problems: the constant degenerates and nothing is checked.
    pub vacuous: bool,
}

impl RateCertificate {
    pub fn passed(&self) -> bool {
        self.vacuous || (self.recurrence.iter().all(|b| *b) && self.envelope_ok.iter().all(|b| *b))
    }

    /// First sweep index failing either check.
    pub fn first_failure(&self) -> Option<usize> {
        (0..self.recurrence.len())
            .find(|&i| !self.recurrence[i] || !self.envelope_ok[i])
            .map(|i| i + 1)
    }
}

/// `h^0, h^1, ...` of a cyclic run.
pub fn objective_series(trace: &SolveTrace) -> Vec<f64> {
    std::iter::once(trace.initial_objective)
        .chain(trace.sweeps.iter().map(|s| s.extended_objective))
        .collect()
}

/// Checks a run's objective values against the alternating-minimization rate:
/// the recurrence with `alpha = mu / (2 c^3 M^2 L^2)`, `c = m - 1` (plain) or
/// `m` (extended), and both closed-form envelopes, with slack
/// `1e-9 max(1, |h*|)`.
///
/// `big_m` is `sup_k max_i ||y_i^(k) - y_i*||` measured on the run (see
/// [`measure_block_radius`]).
pub fn am_rate_envelope(
    trace: &SolveTrace,
    h_star: f64,
    m: usize,
    big_m: f64,
    mu: f64,
    l: f64,
    variant: RateVariant,
) -> Result<RateCertificate, DiagnosticsError> {
    let tol = 1e-9 * h_star.abs().max(1.0);
    let values = objective_series(trace);
    let mut a = Vec::with_capacity(values.len());
    for (k, h) in values.iter().enumerate() {
        let gap = h - h_star;
        if gap < -tol {
            return Err(DiagnosticsError::InconsistentOptimum { sweep: k, h_star, gap });
        }
        a.push(gap.max(0.0));
    }
    let c = match variant {
        RateVariant::Plain => m.saturating_sub(1),
        RateVariant::Extended => m,
    } as f64;
    if c == 0.0 {
        return Ok(RateCertificate {
            alpha: f64::INFINITY,
            a,
            recurrence: Vec::new(),
            envelope: Vec::new(),
            envelope_ok: Vec::new(),
            vacuous: true,
        });
    }
    let scale = c.powi(3) * big_m * big_m * l * l;
    let alpha = mu / (2.0 * scale);
    let mut recurrence = Vec::new();
    let mut envelope = Vec::new();
    let mut envelope_ok = Vec::new();
    let a1 = a.get(1).copied().unwrap_or(0.0);
    let a2 = a.get(2).copied().unwrap_or(0.0);
    for k in 1..a.len() {
        let quad = if scale == 0.0 {
            if a[k] > tol {
                f64::INFINITY
            } else {
                0.0
            }
        } else {
            alpha * a[k] * a[k]
        };
        recurrence.push(a[k - 1] >= a[k] + quad - tol);
        let kf = k as f64;
        let mut bound = (3.0 * scale / mu).max(a1).max(2.0 * a2) / kf;
        if k >= 2 {
            let geometric = 0.5_f64.powf((kf - 1.0) / 2.0) * a[0];
            bound = bound.min(geometric.max(8.0 * scale / (mu * (kf - 1.0))));
        }
        envelope.push(bound);
        envelope_ok.push(a[k] <= bound + tol);
    }
    Ok(RateCertificate { alpha, a, recurrence, envelope, envelope_ok, vacuous: false })
}

/// `max_k max_i ||y_i^(k) - y_i*||` over a recorded run (initial blocks included).
/// Needs the run to have been made with `record_blocks`.
pub fn measure_block_radius(trace: &SolveTrace, y_star: &[Vec<f64>]) -> f64 {
    let radius = |blocks: &[Vec<f64>]| {
        blocks.iter().zip(y_star).map(|(y, s)| dist(y, s)).fold(0.0, f64::max)
    };
    trace
        .sweeps
        .iter()
        .filter_map(|s| s.blocks.as_deref())
        .map(radius)
        .fold(radius(&trace.initial_blocks), f64::max)
}

/// `inf h = 1/2 ||d||^2 - 1/2 ||d - xbar||^2` for `xbar = P_C(d)`.
pub fn optimal_value(d: &[f64], xbar: &[f64]) -> f64 {
    0.5 * norm_sq(d) - 0.5 * norm_sq(&sub(d, xbar))
}

/// `h(y) - inf h`; nonnegative up to rounding.
pub fn optimality_gap<S: ConvexOperator>(
    problem: &Problem<S>,
    blocks: &[Vec<f64>],
    extra: &[ExtraBlock],
    xbar: &[f64],
) -> Result<f64, GeometryError> {
    let h = crate::dykstra::extended_dual_objective(problem, blocks, extra)?;
    Ok(h - optimal_value(&problem.d, xbar))
}

/// Flags sustained growth of the largest dual block norm: a tenfold increase
/// over the last 1000 sweeps with no decrease inside that window.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundednessMonitor {
    pub window: usize,
    pub factor: f64,
    norms: Vec<f64>,
    last_decrease: Option<usize>,
    first_flag: Option<usize>,
}

impl Default for BoundednessMonitor {
    fn default() -> Self {
        Self::new(1000, 10.0)
    }
}

impl BoundednessMonitor {
    pub fn new(window: usize, factor: f64) -> Self {
        Self { window, factor, norms: Vec::new(), last_decrease: None, first_flag: None }
    }

    /// Adds the next sweep's max block norm; returns whether growth has been
    /// flagged so far (the flag is sticky).
    pub fn push(&mut self, norm: f64) -> bool {
        let k = self.norms.len();
        if let Some(&prev) = self.norms.last() {
            if norm < prev - 1e-12 * prev.max(1.0) {
                self.last_decrease = Some(k);
            }
        }
        self.norms.push(norm);
        if self.first_flag.is_none() && k >= self.window {
            let old = self.norms[k - self.window];
            let monotone = self.last_decrease.map_or(true, |j| j <= k - self.window);
            if monotone && old > 0.0 && norm >= self.factor * old {
                self.first_flag = Some(k);
            }
        }
        self.first_flag.is_some()
    }

    pub fn flagged(&self) -> bool {
        self.first_flag.is_some()
    }

    pub fn report(&self) -> BoundednessReport {
        BoundednessReport {
            norms: self.norms.clone(),
            flagged: self.flagged(),
            first_flag: self.first_flag,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundednessReport {
    /// Max block norm per sweep.
    pub norms: Vec<f64>,
    pub flagged: bool,
    /// Index into `norms` where the flag was first raised.
    pub first_flag: Option<usize>,
}

/// Re-runs the growth monitor over a finished trace.
pub fn boundedness_monitor(trace: &SolveTrace) -> BoundednessReport {
    let mut m = BoundednessMonitor::default();
    for s in &trace.sweeps {
        m.push(s.max_block_norm);
    }
    m.report()
}

/// Inner-step monitors of a recorded run against the known `xbar = P_C(d)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AppendixReport {
    /// `v_i = 1/2 ||x_i - xbar||^2 + sum_l <e_l, x_l - xbar>` per inner step,
    /// starting with the initial state.
    pub v: Vec<f64>,
    /// `1/2 ||x_i - xbar||^2`, aligned with `v`.
    pub half_dist_sq: Vec<f64>,
    /// `||x_{i-1} - x_i||^2` per inner step.
    pub increments: Vec<f64>,
    /// Largest `||x_i - (d - sum of current blocks)||` seen.
    pub recovery_error: f64,
}

impl AppendixReport {
    pub fn increment_sum(&self) -> f64 {
        self.increments.iter().sum()
    }
}

/// Replays the inner steps of a trace recorded with `record_inner`.
///
/// Blocks that have been produced by a projection contribute
/// `<y_l, x_l - xbar>` with `x_l` the point of that projection; starting
/// blocks that were never replaced contribute `supp(y_l, C_l) - <y_l, xbar>`.
pub fn appendix_monitor<S: ConvexOperator>(
    problem: &Problem<S>,
    trace: &SolveTrace,
    xbar: &[f64],
) -> Result<AppendixReport, GeometryError> {
    let m = problem.len();
    let metric = &problem.metric;
    let mut blocks = trace.initial_blocks.clone();
    let mut terms: Vec<f64> = Vec::with_capacity(blocks.len());
    for (l, y) in blocks.iter().enumerate() {
        let t = if l < m {
            problem.sets[l].support(y)? - metric.inner(y, xbar)
        } else if y.iter().all(|v| *v == 0.0) {
            0.0
        } else {
            f64::INFINITY
        };
        terms.push(t);
    }
    let mut x = problem.d.clone();
    for y in &blocks {
        crate::linalg::axpy(-1.0, y, &mut x);
    }
    let mut report = AppendixReport::default();
    let half = |x: &[f64]| 0.5 * metric.norm_sq(&sub(x, xbar));
    report.half_dist_sq.push(half(&x));
    report.v.push(report.half_dist_sq[0] + terms.iter().sum::<f64>());

    for step in &trace.inner {
        let b = step.block;
        if b >= blocks.len() {
            continue;
        }
        blocks[b] = step.y.clone();
        terms[b] = if b < m {
            metric.inner(&step.y, &sub(&step.x, xbar))
        } else {
            let e = ExtraBlock { after: 0, y: step.y.clone(), halfspace: step.halfspace.clone() };
            extra_support(&e)? - metric.inner(&step.y, xbar)
        };
        let mut recovered = problem.d.clone();
        for y in &blocks {
            crate::linalg::axpy(-1.0, y, &mut recovered);
        }
        report.recovery_error = report.recovery_error.max(dist(&recovered, &step.x));
        report.increments.push(metric.norm_sq(&sub(&x, &step.x)));
        x = step.x.clone();
        let hd = half(&x);
        report.half_dist_sq.push(hd);
        report.v.push(hd + terms.iter().sum::<f64>());
    }
    Ok(report)
}
