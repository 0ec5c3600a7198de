//! Projection onto an intersection of halfspaces.
//!
//! The projection of `z` onto `{x : Ax <= b}` is `x = z - A^T lambda` where
//! `lambda >= 0` maximizes the concave dual
//! `q(lambda) = lambda^T (Az - b) - 1/2 ||A^T lambda||^2`.
//! It is solved with a dual active-set method that adds one violated
//! constraint at a time. Rows are unit normals, so the active systems are well
//! scaled.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::geometry::{Halfspace, SUPPORT_SNAP};
use crate::linalg::{axpy, dot, norm};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QpError {
    #[error("halfspace intersection appears empty (violation {violation:.3e})")]
    Infeasible { violation: f64 },
    #[error("active-set iteration limit ({0}) reached")]
    IterationLimit(usize),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("no halfspaces given")]
    NoHalfspaces,
}

/// Projection of a point onto a polyhedron together with its KKT multipliers.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyhedralProjection {
    pub x: Vec<f64>,
    /// One per input halfspace; merged duplicates carry zero.
    pub multipliers: Vec<f64>,
    /// Indices with positive multiplier, ascending.
    pub active_set: Vec<usize>,
}

const DUP_COS: f64 = 1.0 - 1e-10;
const DUP_OFFSET: f64 = 1e-10;
const SVD_CUTOFF: f64 = 1e-12;
/// Norm below which the entrant's normal counts as spanned by the active ones.
const DEPENDENT: f64 = 1e-10;

/// Projects `z` onto `{x : <a_j, x> <= b_j for all j}`.
pub fn project_polyhedron(halfspaces: &[Halfspace], z: &[f64]) -> Result<PolyhedralProjection, QpError> {
    project_polyhedron_warm(halfspaces, z, &[])
}

/// Same as [`project_polyhedron`], starting the active-set loop from `warm`
/// (typically the active set of a previous, nearby solve). Out-of-range
/// indices in `warm` are ignored.
pub fn project_polyhedron_warm(
    halfspaces: &[Halfspace],
    z: &[f64],
    warm: &[usize],
) -> Result<PolyhedralProjection, QpError> {
    let first = halfspaces.first().ok_or(QpError::NoHalfspaces)?;
    let n = first.dim();
    for h in halfspaces {
        if h.dim() != n {
            return Err(QpError::DimensionMismatch { expected: n, found: h.dim() });
        }
    }
    if z.len() != n {
        return Err(QpError::DimensionMismatch { expected: n, found: z.len() });
    }
    Solver::new(halfspaces, z).run(warm)
}

/// Blocks `y_j = lambda_j a_j` of the polyhedral projection, so that
/// `z - sum_j y_j = x` and each `y_j` is supported by halfspace `j` at `x`.
pub fn dual_decompose(halfspaces: &[Halfspace], z: &[f64]) -> Result<Vec<Vec<f64>>, QpError> {
    let p = project_polyhedron(halfspaces, z)?;
    Ok(blocks_from_multipliers(halfspaces, &p.multipliers))
}

pub(crate) fn blocks_from_multipliers(halfspaces: &[Halfspace], multipliers: &[f64]) -> Vec<Vec<f64>> {
    halfspaces
        .iter()
        .zip(multipliers)
        .map(|(h, l)| h.normal().iter().map(|a| l * a).collect())
        .collect()
}

/// `sup { <y, x> : Ax <= b }`.
///
/// The value is finite exactly when `y` lies in the cone spanned by the
/// normals. `y` is first projected onto that cone (via the polar cone
/// `{x : Ax <= 0}`); if the distance is within the snapping tolerance the LP is
/// solved for the snapped direction, otherwise the value is `+inf`.
pub fn polyhedron_support(halfspaces: &[Halfspace], y: &[f64]) -> Result<f64, QpError> {
    if y.iter().all(|v| *v == 0.0) {
        return Ok(0.0);
    }
    let polar: Vec<Halfspace> = halfspaces
        .iter()
        .map(|h| Halfspace::new(h.normal().to_vec(), 0.0).expect("unit normal"))
        .collect();
    let p = project_polyhedron(&polar, y)?;
    if norm(&p.x) > SUPPORT_SNAP * norm(y).max(1.0) {
        return Ok(f64::INFINITY);
    }
    let snapped: Vec<f64> = y.iter().zip(&p.x).map(|(a, b)| a - b).collect();

    // sup over the polyhedron equals the dual LP min <b, mu> s.t. A^T mu = y, mu >= 0
    use minilp::{ComparisonOp, Error as LpError, LinearExpr, OptimizationDirection, Problem};
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<_> = halfspaces.iter().map(|h| lp.add_var(h.offset(), (0.0, f64::INFINITY))).collect();
    for (k, yk) in snapped.iter().enumerate() {
        let mut row = LinearExpr::empty();
        for (v, h) in vars.iter().zip(halfspaces) {
            row.add(*v, h.normal()[k]);
        }
        lp.add_constraint(row, ComparisonOp::Eq, *yk);
    }
    match lp.solve() {
        Ok(sol) => Ok(sol.objective()),
        Err(LpError::Infeasible) => Ok(f64::INFINITY),
        Err(LpError::Unbounded) => Err(QpError::Infeasible { violation: f64::NAN }),
    }
}

struct Solver<'a> {
    hs: &'a [Halfspace],
    z: &'a [f64],
    /// `rep[j] == j` unless `j` duplicates an earlier halfspace.
    rep: Vec<usize>,
    tol: f64,
}

/// Dual step of one added constraint: `r` expresses the entrant's normal in
/// the active normals, `step` is the part of it orthogonal to them.
struct Direction {
    r: Vec<f64>,
    step: Vec<f64>,
}

impl<'a> Solver<'a> {
    fn new(hs: &'a [Halfspace], z: &'a [f64]) -> Self {
        let mut rep: Vec<usize> = (0..hs.len()).collect();
        for j in 0..hs.len() {
            for i in 0..j {
                if rep[i] == i
                    && dot(hs[i].normal(), hs[j].normal()) > DUP_COS
                    && (hs[i].offset() - hs[j].offset()).abs() < DUP_OFFSET
                {
                    rep[j] = i;
                    break;
                }
            }
        }
        let scale = hs.iter().fold(norm(z).max(1.0), |s, h| s.max(h.offset().abs()));
        Self { hs, z, rep, tol: 1e-12 * scale }
    }

    /// Least-squares split of the normal of `p` over the active normals.
    fn direction(&self, active: &[usize], p: usize) -> Direction {
        let n = self.z.len();
        let a_p = self.hs[p].normal();
        if active.is_empty() {
            return Direction { r: Vec::new(), step: a_p.to_vec() };
        }
        let a = DMatrix::from_fn(n, active.len(), |r, c| self.hs[active[c]].normal()[r]);
        let b = DVector::from_column_slice(a_p);
        let svd = a.clone().svd(true, true);
        let smax = svd.singular_values.iter().fold(0.0_f64, |m, s| m.max(*s));
        let r = svd.solve(&b, SVD_CUTOFF * smax).expect("U and V requested");
        let step = &b - &a * &r;
        Direction { r: r.iter().copied().collect(), step: step.iter().copied().collect() }
    }

    /// Goldfarb-Idnani dual active-set method with identity Hessian: start at
    /// the unconstrained minimizer `z`, repeatedly add a violated constraint,
    /// dropping active ones whose multipliers would turn negative. The active
    /// normals stay linearly independent. A violated constraint whose normal
    /// is spanned by active normals with no multiplier to decrease certifies
    /// infeasibility.
    fn run(&self, warm: &[usize]) -> Result<PolyhedralProjection, QpError> {
        let m = self.hs.len();
        let n = self.z.len();
        let mut lambda = vec![0.0; m];
        let mut active: Vec<usize> = Vec::new();
        let mut x = self.z.to_vec();
        let mut preferred = vec![false; m];
        for &j in warm {
            if j < m {
                preferred[self.rep[j]] = true;
            }
        }
        let max_iter = 100 + 20 * (m + n);

        let mut iterations = 0;
        loop {
            // entrant: the most violated constraint, warm-start hints first
            let mut entrant: Option<(bool, f64, usize)> = None;
            for j in 0..m {
                if self.rep[j] != j || lambda[j] > 0.0 {
                    continue;
                }
                let w = self.hs[j].violation(&x);
                if w > self.tol {
                    let key = (preferred[j], w, j);
                    if entrant.is_none_or(|(p, v, _)| (key.0, key.1) > (p, v)) {
                        entrant = Some(key);
                    }
                }
            }
            let Some((_, _, p)) = entrant else {
                return Ok(self.finish(x, lambda, active));
            };
            preferred[p] = false;

            let mut lambda_p = 0.0;
            loop {
                iterations += 1;
                if iterations > max_iter {
                    return Err(QpError::IterationLimit(max_iter));
                }
                let dir = self.direction(&active, p);
                let step_sq = dot(&dir.step, &dir.step);
                let full = if step_sq > DEPENDENT * DEPENDENT {
                    Some(self.hs[p].violation(&x) / step_sq)
                } else {
                    None
                };
                // largest dual step before an active multiplier reaches zero
                let mut partial: Option<(f64, usize)> = None;
                for (k, &j) in active.iter().enumerate() {
                    if dir.r[k] > 0.0 {
                        let t = lambda[j] / dir.r[k];
                        if partial.is_none_or(|(best, _)| t < best) {
                            partial = Some((t, k));
                        }
                    }
                }
                let (t, drop) = match (full, partial) {
                    (None, None) => {
                        return Err(QpError::Infeasible { violation: self.hs[p].violation(&x) });
                    }
                    (Some(f), Some((t, k))) if t < f => (t, Some(k)),
                    (Some(f), _) => (f.max(0.0), None),
                    (None, Some((t, k))) => (t, Some(k)),
                };
                if full.is_some() {
                    axpy(-t, &dir.step, &mut x);
                }
                for (k, &j) in active.iter().enumerate() {
                    lambda[j] = (lambda[j] - t * dir.r[k]).max(0.0);
                }
                lambda_p += t;
                match drop {
                    Some(k) => {
                        let j = active.remove(k);
                        lambda[j] = 0.0;
                    }
                    None => {
                        lambda[p] = lambda_p;
                        active.push(p);
                        break;
                    }
                }
            }
            // recompute from the multipliers to keep x and lambda consistent
            x = self.z.to_vec();
            for &j in &active {
                axpy(-lambda[j], self.hs[j].normal(), &mut x);
            }
        }
    }

    fn finish(&self, x: Vec<f64>, lambda: Vec<f64>, mut active: Vec<usize>) -> PolyhedralProjection {
        active.retain(|&j| lambda[j] > 0.0);
        active.sort_unstable();
        PolyhedralProjection { x, multipliers: lambda, active_set: active }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn h(a: &[f64], b: f64) -> Halfspace {
        Halfspace::new(a.to_vec(), b).unwrap()
    }

    fn orthant() -> Vec<Halfspace> {
        vec![h(&[1.0, 0.0], 0.0), h(&[0.0, 1.0], 0.0)]
    }

    #[test]
    fn orthant_corner() {
        let p = project_polyhedron(&orthant(), &[1.0, 2.0]).unwrap();
        assert_abs_diff_eq!(p.x[0], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(p.x[1], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(p.multipliers[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(p.multipliers[1], 2.0, epsilon = 1e-14);
        assert_eq!(p.active_set, vec![0, 1]);
    }

    #[test]
    fn orthant_corner_matches_grid_search() {
        // oracle: brute-force nearest lattice point of the feasible region
        let z = [1.0, 2.0];
        let mut best = (f64::INFINITY, [0.0, 0.0]);
        for i in -200..=0 {
            for j in -200..=0 {
                let p = [i as f64 * 0.01, j as f64 * 0.01];
                let d = (p[0] - z[0]).powi(2) + (p[1] - z[1]).powi(2);
                if d < best.0 {
                    best = (d, p);
                }
            }
        }
        let p = project_polyhedron(&orthant(), &z).unwrap();
        assert_abs_diff_eq!(p.x[0], best.1[0], epsilon = 1e-2);
        assert_abs_diff_eq!(p.x[1], best.1[1], epsilon = 1e-2);
    }

    #[test]
    fn interior_point() {
        let p = project_polyhedron(&orthant(), &[-1.0, -1.0]).unwrap();
        assert_eq!(p.x, vec![-1.0, -1.0]);
        assert_eq!(p.multipliers, vec![0.0, 0.0]);
        assert!(p.active_set.is_empty());
    }

    #[test]
    fn single_halfspace() {
        let p = project_polyhedron(&[h(&[1.0, 1.0], 0.0)], &[1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(p.x[0], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(p.x[1], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn decompose_blocks() {
        let y = dual_decompose(&orthant(), &[1.0, 2.0]).unwrap();
        assert_abs_diff_eq!(y[0][0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(y[1][1], 2.0, epsilon = 1e-14);
        assert_eq!(y[0][1], 0.0);
        assert_eq!(y[1][0], 0.0);
        let y = dual_decompose(&orthant(), &[-1.0, -3.0]).unwrap();
        assert!(y.iter().flatten().all(|v| *v == 0.0));
        let single = [h(&[0.0, 1.0], 1.0)];
        let y = dual_decompose(&single, &[4.0, 3.0]).unwrap();
        assert_abs_diff_eq!(y[0][1], 2.0, epsilon = 1e-14);
    }

    #[test]
    fn duplicates_are_merged() {
        let hs = vec![h(&[1.0, 0.0], 0.0), h(&[2.0, 0.0], 0.0), h(&[0.0, 1.0], 0.0)];
        let p = project_polyhedron(&hs, &[1.0, 1.0]).unwrap();
        assert_eq!(p.multipliers[1], 0.0);
        assert_abs_diff_eq!(p.multipliers[0], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn degenerate_vertex() {
        // three lines through the origin in the plane
        let hs = vec![h(&[1.0, 0.0], 0.0), h(&[0.0, 1.0], 0.0), h(&[1.0, 1.0], 0.0)];
        let p = project_polyhedron(&hs, &[1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(p.x[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.x[1], 0.0, epsilon = 1e-12);
        let mut x = vec![1.0, 1.0];
        for (hs, l) in hs.iter().zip(&p.multipliers) {
            assert!(*l >= 0.0);
            axpy(-l, hs.normal(), &mut x);
        }
        assert_abs_diff_eq!(x[0], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn slab_with_antiparallel_faces() {
        let hs = vec![h(&[1.0, 0.0], 1.0), h(&[-1.0, 0.0], 1.0)];
        let p = project_polyhedron(&hs, &[3.0, 2.0]).unwrap();
        assert_abs_diff_eq!(p.x[0], 1.0, epsilon = 1e-14);
        // a flat slab {x1 = 1} as two opposite halfspaces
        let hs = vec![h(&[1.0, 0.0], 1.0), h(&[-1.0, 0.0], -1.0)];
        let p = project_polyhedron(&hs, &[-3.0, 2.0]).unwrap();
        assert_abs_diff_eq!(p.x[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn infeasible_is_reported() {
        let hs = vec![h(&[1.0, 0.0], -1.0), h(&[-1.0, 0.0], -1.0)];
        let r = project_polyhedron(&hs, &[0.5, 0.0]);
        assert!(matches!(r, Err(QpError::Infeasible { .. })), "{r:?}");
    }

    #[test]
    fn warm_start_gives_same_answer() {
        let hs = vec![h(&[1.0, 0.2], 0.0), h(&[0.1, 1.0], 0.5), h(&[-1.0, 1.0], 2.0)];
        let z = [3.0, 4.0];
        let cold = project_polyhedron(&hs, &z).unwrap();
        for warm in [vec![0, 1, 2], vec![2], vec![7, 0]] {
            let w = project_polyhedron_warm(&hs, &z, &warm).unwrap();
            for k in 0..2 {
                assert_abs_diff_eq!(w.x[k], cold.x[k], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn support_of_orthant_shifted() {
        // {x1 <= 1, x2 <= 2}
        let hs = vec![h(&[1.0, 0.0], 1.0), h(&[0.0, 1.0], 2.0)];
        assert_abs_diff_eq!(polyhedron_support(&hs, &[1.0, 1.0]).unwrap(), 3.0, epsilon = 1e-9);
        assert_eq!(polyhedron_support(&hs, &[-1.0, 1.0]).unwrap(), f64::INFINITY);
        assert_eq!(polyhedron_support(&hs, &[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn dimension_errors() {
        assert_eq!(project_polyhedron(&[], &[1.0]), Err(QpError::NoHalfspaces));
        assert!(matches!(
            project_polyhedron(&orthant(), &[1.0]),
            Err(QpError::DimensionMismatch { .. })
        ));
    }
}
