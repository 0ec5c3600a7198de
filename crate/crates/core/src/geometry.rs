//! Convex-set descriptors with exact projections and support functions.
//!
//! Every solver in the crate consumes sets through the [`ConvexOperator`]
//! trait: a Euclidean projection that also reports the residual `z - P(z)` and
//! the supporting halfspace it generates, plus the support function
//! `sup_{x in C} <y, x>`.

use thiserror::Error;

use crate::linalg::{dot, norm, sub};
use crate::qp::{self, QpError};

/// Residuals with `||z - x|| <= ZERO_RESIDUAL * max(1, ||z||)` count as zero:
/// no supporting halfspace is emitted for them.
pub const ZERO_RESIDUAL: f64 = 1e-12;

/// Relative tolerance used when deciding whether `y` is a direction in which
/// the support function is finite (e.g. a nonnegative multiple of a halfspace
/// normal). Rounding along an iterate path must not turn a finite value into
/// `+inf`.
pub const SUPPORT_SNAP: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("normal vector is zero")]
    ZeroNormal,
    #[error("non-finite coordinate in {0}")]
    NonFinite(&'static str),
    #[error("box bounds are inverted at coordinate {0}")]
    InvertedBox(usize),
    #[error("ball radius must be finite and nonnegative, got {0}")]
    BadRadius(f64),
    #[error("polyhedron needs at least one halfspace")]
    EmptyPolyhedron,
    #[error(transparent)]
    Qp(#[from] QpError),
}

fn check_dim(expected: usize, found: usize) -> Result<(), GeometryError> {
    if expected == found {
        Ok(())
    } else {
        Err(GeometryError::DimensionMismatch { expected, found })
    }
}

fn check_finite(v: &[f64], what: &'static str) -> Result<(), GeometryError> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(GeometryError::NonFinite(what))
    }
}

/// `{x : <a, x> <= b}` with `||a|| = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Halfspace {
    normal: Vec<f64>,
    offset: f64,
}

impl Halfspace {
    /// Builds `{x : <a, x> <= b}`, rescaling so the stored normal has unit length.
    pub fn new(normal: Vec<f64>, offset: f64) -> Result<Self, GeometryError> {
        check_finite(&normal, "halfspace normal")?;
        if !offset.is_finite() {
            return Err(GeometryError::NonFinite("halfspace offset"));
        }
        let len = norm(&normal);
        if len == 0.0 || !len.is_finite() {
            return Err(GeometryError::ZeroNormal);
        }
        Ok(Self {
            normal: normal.iter().map(|v| v / len).collect(),
            offset: offset / len,
        })
    }

    pub fn normal(&self) -> &[f64] {
        &self.normal
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn dim(&self) -> usize {
        self.normal.len()
    }

    /// `<a, x> - b`; positive outside.
    pub fn violation(&self, x: &[f64]) -> f64 {
        dot(&self.normal, x) - self.offset
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.violation(x) <= tol
    }

    fn project(&self, z: &[f64]) -> Vec<f64> {
        let v = self.violation(z);
        if v <= 0.0 {
            z.to_vec()
        } else {
            z.iter().zip(&self.normal).map(|(zi, ai)| zi - v * ai).collect()
        }
    }

    fn support(&self, y: &[f64]) -> f64 {
        let t = dot(y, &self.normal);
        let off_axis: f64 = y
            .iter()
            .zip(&self.normal)
            .map(|(yi, ai)| (yi - t * ai).powi(2))
            .sum::<f64>()
            .sqrt();
        let tol = SUPPORT_SNAP * norm(y).max(1.0);
        if off_axis <= tol && t >= -tol {
            t.max(0.0) * self.offset
        } else {
            f64::INFINITY
        }
    }
}

/// `{x : <a, x> = b}` with `||a|| = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperplane {
    normal: Vec<f64>,
    offset: f64,
}

impl Hyperplane {
    pub fn new(normal: Vec<f64>, offset: f64) -> Result<Self, GeometryError> {
        let h = Halfspace::new(normal, offset)?;
        Ok(Self {
            normal: h.normal,
            offset: h.offset,
        })
    }

    pub fn normal(&self) -> &[f64] {
        &self.normal
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }
}

/// Axis-aligned box `lo <= x <= hi`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxSet {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl BoxSet {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, GeometryError> {
        check_dim(lo.len(), hi.len())?;
        check_finite(&lo, "box lower bound")?;
        check_finite(&hi, "box upper bound")?;
        if let Some(i) = lo.iter().zip(&hi).position(|(l, h)| l > h) {
            return Err(GeometryError::InvertedBox(i));
        }
        Ok(Self { lo, hi })
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }
}

/// Closed ball; a zero radius is a single point.
#[derive(Debug, Clone, PartialEq)]
pub struct Ball {
    center: Vec<f64>,
    radius: f64,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self, GeometryError> {
        check_finite(&center, "ball center")?;
        if !(radius.is_finite() && radius >= 0.0) {
            return Err(GeometryError::BadRadius(radius));
        }
        Ok(Self { center, radius })
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }
}

/// `p + span(u_1, ..., u_k)`, stored with an orthonormal basis.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineSubspace {
    base: Vec<f64>,
    basis: Vec<Vec<f64>>,
}

impl AffineSubspace {
    /// Orthonormalizes `directions` (modified Gram-Schmidt); directions that are
    /// numerically dependent on earlier ones are dropped.
    pub fn new(base: Vec<f64>, directions: Vec<Vec<f64>>) -> Result<Self, GeometryError> {
        check_finite(&base, "affine base point")?;
        let n = base.len();
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(directions.len());
        for dir in directions {
            check_dim(n, dir.len())?;
            check_finite(&dir, "affine direction")?;
            let scale = norm(&dir);
            let mut v = dir;
            for _ in 0..2 {
                for u in &basis {
                    let c = dot(&v, u);
                    v.iter_mut().zip(u).for_each(|(vi, ui)| *vi -= c * ui);
                }
            }
            let len = norm(&v);
            if len > 1e-10 * scale.max(f64::MIN_POSITIVE) {
                basis.push(v.iter().map(|x| x / len).collect());
            }
        }
        Ok(Self { base, basis })
    }

    pub fn base(&self) -> &[f64] {
        &self.base
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }
}

/// Intersection of finitely many halfspaces. Nonemptiness is the caller's
/// responsibility; an empty one surfaces as [`QpError::Infeasible`] when projected.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyhedron {
    halfspaces: Vec<Halfspace>,
}

impl Polyhedron {
    pub fn new(halfspaces: Vec<Halfspace>) -> Result<Self, GeometryError> {
        let first = halfspaces.first().ok_or(GeometryError::EmptyPolyhedron)?;
        let n = first.dim();
        for h in &halfspaces {
            check_dim(n, h.dim())?;
        }
        Ok(Self { halfspaces })
    }

    pub fn halfspaces(&self) -> &[Halfspace] {
        &self.halfspaces
    }
}

/// One closed convex set `C_i` of a best-approximation problem.
#[derive(Debug, Clone, PartialEq)]
pub enum ConvexSet {
    Halfspace(Halfspace),
    Hyperplane(Hyperplane),
    Box(BoxSet),
    Ball(Ball),
    Affine(AffineSubspace),
    Polyhedron(Polyhedron),
    WholeSpace { dim: usize },
}

/// Output of one projection `x = P_C(z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionResult {
    /// The projection.
    pub x: Vec<f64>,
    /// The residual `z - x`, a normal-cone element of the set at `x`.
    pub y: Vec<f64>,
    /// Supporting halfspace at `x` with normal along `y`; `None` when `y` is zero.
    pub halfspace: Option<Halfspace>,
}

impl ProjectionResult {
    /// Assembles the result from `z` and its projection `x`.
    pub fn from_projection(z: &[f64], x: Vec<f64>) -> Self {
        let halfspace = supporting_halfspace(z, &x);
        let y = sub(z, &x);
        Self { x, y, halfspace }
    }
}

/// Generates the halfspace `{x' : <z - x, x' - x> <= 0}` for `x = P_D(z)`.
///
/// It contains `D` and its support function agrees with that of `D` at
/// `z - x`. Returns `None` (the whole space) when the residual is numerically zero.
pub fn supporting_halfspace(z: &[f64], x: &[f64]) -> Option<Halfspace> {
    let y = sub(z, x);
    let len = norm(&y);
    if len <= ZERO_RESIDUAL * norm(z).max(1.0) {
        return None;
    }
    let normal: Vec<f64> = y.iter().map(|v| v / len).collect();
    let offset = dot(&normal, x);
    Some(Halfspace { normal, offset })
}

/// Anything Dykstra-type solvers can project onto.
///
/// Implementors define projection and support in the inner product of the
/// space they live in (Euclidean for [`ConvexSet`], weighted for the lifted
/// product-space sets).
pub trait ConvexOperator {
    fn dim(&self) -> usize;
    fn project(&self, z: &[f64]) -> Result<ProjectionResult, GeometryError>;
    /// `sup_{x in C} <y, x>`, possibly `+inf`.
    fn support(&self, y: &[f64]) -> Result<f64, GeometryError>;
}

impl ConvexSet {
    pub fn halfspace(normal: Vec<f64>, offset: f64) -> Result<Self, GeometryError> {
        Halfspace::new(normal, offset).map(Self::Halfspace)
    }

    pub fn hyperplane(normal: Vec<f64>, offset: f64) -> Result<Self, GeometryError> {
        Hyperplane::new(normal, offset).map(Self::Hyperplane)
    }

    pub fn boxed(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, GeometryError> {
        BoxSet::new(lo, hi).map(Self::Box)
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self, GeometryError> {
        Ball::new(center, radius).map(Self::Ball)
    }

    pub fn affine(base: Vec<f64>, directions: Vec<Vec<f64>>) -> Result<Self, GeometryError> {
        AffineSubspace::new(base, directions).map(Self::Affine)
    }

    pub fn polyhedron(halfspaces: Vec<Halfspace>) -> Result<Self, GeometryError> {
        Polyhedron::new(halfspaces).map(Self::Polyhedron)
    }

    pub fn whole_space(dim: usize) -> Self {
        Self::WholeSpace { dim }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Halfspace(h) => h.dim(),
            Self::Hyperplane(h) => h.normal.len(),
            Self::Box(b) => b.lo.len(),
            Self::Ball(b) => b.center.len(),
            Self::Affine(a) => a.base.len(),
            Self::Polyhedron(p) => p.halfspaces[0].dim(),
            Self::WholeSpace { dim } => *dim,
        }
    }

    /// Euclidean projection of `z`. Polyhedra are handed to the active-set QP.
    pub fn project(&self, z: &[f64]) -> Result<ProjectionResult, GeometryError> {
        check_dim(self.dim(), z.len())?;
        let x = match self {
            Self::Halfspace(h) => h.project(z),
            Self::Hyperplane(h) => {
                let v = dot(&h.normal, z) - h.offset;
                z.iter().zip(&h.normal).map(|(zi, ai)| zi - v * ai).collect()
            }
            Self::Box(b) => z
                .iter()
                .zip(b.lo.iter().zip(&b.hi))
                .map(|(zi, (l, h))| zi.clamp(*l, *h))
                .collect(),
            Self::Ball(b) => {
                let v = sub(z, &b.center);
                let len = norm(&v);
                if len <= b.radius {
                    z.to_vec()
                } else {
                    let t = b.radius / len;
                    b.center.iter().zip(&v).map(|(c, vi)| c + t * vi).collect()
                }
            }
            Self::Affine(a) => {
                let rel = sub(z, &a.base);
                let mut x = a.base.clone();
                for u in &a.basis {
                    let c = dot(&rel, u);
                    x.iter_mut().zip(u).for_each(|(xi, ui)| *xi += c * ui);
                }
                x
            }
            Self::Polyhedron(p) => qp::project_polyhedron(&p.halfspaces, z)?.x,
            Self::WholeSpace { .. } => z.to_vec(),
        };
        Ok(ProjectionResult::from_projection(z, x))
    }

    /// Support function `sup_{x in C} <y, x>`; `0` at `y = 0`, `+inf` outside
    /// the barrier cone.
    pub fn support(&self, y: &[f64]) -> Result<f64, GeometryError> {
        check_dim(self.dim(), y.len())?;
        if y.iter().all(|v| *v == 0.0) {
            return Ok(0.0);
        }
        let tol = SUPPORT_SNAP * norm(y).max(1.0);
        let value = match self {
            Self::Halfspace(h) => h.support(y),
            Self::Hyperplane(h) => {
                let t = dot(y, &h.normal);
                let off_axis = y
                    .iter()
                    .zip(&h.normal)
                    .map(|(yi, ai)| (yi - t * ai).powi(2))
                    .sum::<f64>()
                    .sqrt();
                if off_axis <= tol {
                    t * h.offset
                } else {
                    f64::INFINITY
                }
            }
            Self::Box(b) => y
                .iter()
                .zip(b.lo.iter().zip(&b.hi))
                .map(|(yi, (l, h))| (yi * l).max(yi * h))
                .sum(),
            Self::Ball(b) => dot(y, &b.center) + b.radius * norm(y),
            Self::Affine(a) => {
                let along: f64 = a.basis.iter().map(|u| dot(y, u).powi(2)).sum::<f64>().sqrt();
                if along <= tol {
                    dot(y, &a.base)
                } else {
                    f64::INFINITY
                }
            }
            Self::Polyhedron(p) => qp::polyhedron_support(&p.halfspaces, y)?,
            Self::WholeSpace { .. } => {
                if norm(y) <= tol {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        };
        Ok(value)
    }

    /// Euclidean distance from `z` to the set.
    pub fn distance(&self, z: &[f64]) -> Result<f64, GeometryError> {
        Ok(norm(&self.project(z)?.y))
    }
}

impl ConvexOperator for ConvexSet {
    fn dim(&self) -> usize {
        ConvexSet::dim(self)
    }

    fn project(&self, z: &[f64]) -> Result<ProjectionResult, GeometryError> {
        ConvexSet::project(self, z)
    }

    fn support(&self, y: &[f64]) -> Result<f64, GeometryError> {
        ConvexSet::support(self, y)
    }
}
