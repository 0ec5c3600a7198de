//! Problem instances: a point `d` and the sets whose intersection it is projected onto.

use thiserror::Error;

use crate::geometry::{ConvexOperator, ConvexSet, GeometryError};
use crate::linalg::dot;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("a problem needs at least one set")]
    NoSets,
    #[error("set {index} has dimension {found}, expected {expected}")]
    SetDimension { index: usize, expected: usize, found: usize },
    #[error("non-finite coordinate in d")]
    NonFinite,
    #[error("block {index} has dimension {found}, expected {expected}")]
    BlockDimension { index: usize, expected: usize, found: usize },
    #[error("expected {expected} dual blocks, found {found}")]
    BlockCount { expected: usize, found: usize },
    #[error("weights: {0}")]
    Weights(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Inner product of the space the problem lives in.
///
/// `Weighted` is the product-space inner product `sum_i lambda_i <u_i, v_i>`
/// over consecutive blocks of length `block`.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Metric {
    #[default]
    Euclidean,
    Weighted { weights: Vec<f64>, block: usize },
}

impl Metric {
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::Euclidean => dot(a, b),
            Metric::Weighted { weights, block } => weights
                .iter()
                .enumerate()
                .map(|(i, w)| w * dot(&a[i * block..(i + 1) * block], &b[i * block..(i + 1) * block]))
                .sum(),
        }
    }

    pub fn norm_sq(&self, a: &[f64]) -> f64 {
        self.inner(a, a)
    }
}

/// `min 1/2 ||x - d||^2` subject to `x` in every set.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem<S = ConvexSet> {
    pub d: Vec<f64>,
    pub sets: Vec<S>,
    pub metric: Metric,
}

impl<S: ConvexOperator> Problem<S> {
    pub fn new(d: Vec<f64>, sets: Vec<S>) -> Result<Self, ProblemError> {
        Self::with_metric(d, sets, Metric::Euclidean)
    }

    pub fn with_metric(d: Vec<f64>, sets: Vec<S>, metric: Metric) -> Result<Self, ProblemError> {
        if sets.is_empty() {
            return Err(ProblemError::NoSets);
        }
        if d.iter().any(|v| !v.is_finite()) {
            return Err(ProblemError::NonFinite);
        }
        for (index, s) in sets.iter().enumerate() {
            if s.dim() != d.len() {
                return Err(ProblemError::SetDimension { index, expected: d.len(), found: s.dim() });
            }
        }
        Ok(Self { d, sets, metric })
    }

    pub fn dim(&self) -> usize {
        self.d.len()
    }

    /// Number of sets `m`.
    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    /// `max_i dist(x, C_i)`.
    pub fn max_distance(&self, x: &[f64]) -> Result<f64, GeometryError> {
        let mut worst = 0.0_f64;
        for s in &self.sets {
            let r = s.project(x)?;
            worst = worst.max(self.metric.norm_sq(&r.y).sqrt());
        }
        Ok(worst)
    }

    pub(crate) fn check_blocks(&self, blocks: &[Vec<f64>]) -> Result<(), ProblemError> {
        if blocks.len() != self.len() {
            return Err(ProblemError::BlockCount { expected: self.len(), found: blocks.len() });
        }
        for (index, b) in blocks.iter().enumerate() {
            if b.len() != self.dim() {
                return Err(ProblemError::BlockDimension { index, expected: self.dim(), found: b.len() });
            }
        }
        Ok(())
    }
}
