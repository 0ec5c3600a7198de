//! On-disk problem description (TOML).
//!
//! ```toml
//! algorithm = "dykstra"
//! d = [1.0, 1.0]
//!
//! [[sets]]
//! type = "halfspace"
//! normal = [1.0, 0.0]
//! offset = 0.0
//!
//! [options]
//! tolerance = 1e-8
//! ```

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    #[default]
    Dykstra,
    Extended,
    Simultaneous,
    Tree,
    Apg,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Dykstra => "dykstra",
            Algorithm::Extended => "extended",
            Algorithm::Simultaneous => "simultaneous",
            Algorithm::Tree => "tree",
            Algorithm::Apg => "apg",
        }
    }
}

/// When to run the halfspace-QP refinement (extended) or improvement (apg).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ShqpSchedule {
    #[default]
    Off,
    /// after every sweep or iteration
    Every,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HalfspaceSpec {
    pub normal: Vec<f64>,
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum SetSpec {
    Halfspace { normal: Vec<f64>, offset: f64 },
    Hyperplane { normal: Vec<f64>, offset: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    Affine { base: Vec<f64>, directions: Vec<Vec<f64>> },
    Polyhedron { halfspaces: Vec<HalfspaceSpec> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TreeSpec {
    Leaf {
        set: usize,
    },
    Node {
        children: Vec<TreeSpec>,
        #[serde(default, skip_serializing_if = "std::ops::Not::not")]
        shqp: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptionsSpec {
    /// Bound on the largest distance from the primal point to a set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dual_tolerance: Option<f64>,
    /// Sweeps, or iterations for apg.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_sweeps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub buffer_capacity: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shqp_schedule: Option<ShqpSchedule>,
    /// Starting dual blocks, one per set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warmstart: Option<Vec<Vec<f64>>>,
    /// Draw starting blocks of norm at most this value from `seed`
    /// (ignored when `warmstart` is given).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub random_warmstart: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Target accuracy for the apg iteration-count estimate.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    /// Optional; checked against `d` when present.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dimension: Option<usize>,
    #[serde(default)]
    pub algorithm: Algorithm,
    pub d: Vec<f64>,
    pub sets: Vec<SetSpec>,
    /// Product-space weights; uniform when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    /// Averaging tree for `algorithm = "tree"`; one level when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tree: Option<TreeSpec>,
    /// Known projection of `d`, for the gap and the `v` column.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<Vec<f64>>,
    /// Known dual minimizer, for the apg iteration-count estimate.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dual_reference: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub options: OptionsSpec,
}
