use std::path::{Path, PathBuf};

use bestapprox::geometry::{ConvexSet, Halfspace};
use bestapprox::problem::Problem;
use bestapprox::product_space::{TreeNode, TreeTopology, Weights};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::schema::{Algorithm, ProblemFile, SetSpec, ShqpSchedule, TreeSpec};

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch { what: String, expected: usize, found: usize },
    #[error("invalid {what}: {message}")]
    Invalid { what: String, message: String },
}

fn invalid(what: impl Into<String>, message: impl ToString) -> LoadError {
    LoadError::Invalid { what: what.into(), message: message.to_string() }
}

/// Fully resolved run settings.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub tolerance: f64,
    pub dual_tolerance: f64,
    pub max_sweeps: usize,
    pub buffer_capacity: usize,
    pub shqp: ShqpSchedule,
    pub warmstart: Vec<Vec<f64>>,
    pub seed: u64,
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub algorithm: Algorithm,
    pub problem: Problem,
    pub weights: Weights,
    pub tree: TreeTopology,
    pub reference: Option<Vec<f64>>,
    pub dual_reference: Option<Vec<Vec<f64>>>,
    pub config: RunConfig,
}

impl Instance {
    pub fn len(&self) -> usize {
        self.problem.len()
    }

    pub fn is_empty(&self) -> bool {
        self.problem.is_empty()
    }
}

pub fn read_problem_file(path: &Path) -> Result<ProblemFile, LoadError> {
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io { path: path.to_owned(), source })?;
    parse_problem_file(&text)
}

/// Syntax errors become [`LoadError::Parse`]; well-formed TOML that does not
/// fit the schema becomes [`LoadError::Schema`] with the offending field path.
pub fn parse_problem_file(text: &str) -> Result<ProblemFile, LoadError> {
    let value: toml::Value = text.parse().map_err(|e: toml::de::Error| LoadError::Parse(e.message().to_owned()))?;
    serde_path_to_error::deserialize(value).map_err(|e| LoadError::Schema {
        path: e.path().to_string(),
        message: e.inner().message().to_owned(),
    })
}

pub fn load_problem(path: &Path) -> Result<Instance, LoadError> {
    build_instance(&read_problem_file(path)?)
}

fn check_dim(what: impl Into<String>, expected: usize, v: &[f64]) -> Result<(), LoadError> {
    if v.len() != expected {
        return Err(LoadError::DimensionMismatch { what: what.into(), expected, found: v.len() });
    }
    Ok(())
}

fn build_set(i: usize, spec: &SetSpec, n: usize) -> Result<ConvexSet, LoadError> {
    let what = format!("sets[{i}]");
    let set = match spec {
        SetSpec::Halfspace { normal, offset } => {
            check_dim(&what, n, normal)?;
            ConvexSet::halfspace(normal.clone(), *offset)
        }
        SetSpec::Hyperplane { normal, offset } => {
            check_dim(&what, n, normal)?;
            ConvexSet::hyperplane(normal.clone(), *offset)
        }
        SetSpec::Box { lo, hi } => {
            check_dim(format!("{what}.lo"), n, lo)?;
            check_dim(format!("{what}.hi"), n, hi)?;
            ConvexSet::boxed(lo.clone(), hi.clone())
        }
        SetSpec::Ball { center, radius } => {
            check_dim(&what, n, center)?;
            ConvexSet::ball(center.clone(), *radius)
        }
        SetSpec::Affine { base, directions } => {
            check_dim(format!("{what}.base"), n, base)?;
            for (k, dir) in directions.iter().enumerate() {
                check_dim(format!("{what}.directions[{k}]"), n, dir)?;
            }
            ConvexSet::affine(base.clone(), directions.clone())
        }
        SetSpec::Polyhedron { halfspaces } => {
            let mut hs = Vec::with_capacity(halfspaces.len());
            for (k, h) in halfspaces.iter().enumerate() {
                check_dim(format!("{what}.halfspaces[{k}]"), n, &h.normal)?;
                hs.push(Halfspace::new(h.normal.clone(), h.offset).map_err(|e| invalid(format!("{what}.halfspaces[{k}]"), e))?);
            }
            ConvexSet::polyhedron(hs)
        }
    };
    set.map_err(|e| invalid(what, e))
}

fn build_tree(spec: &TreeSpec) -> TreeNode {
    match spec {
        TreeSpec::Leaf { set } => TreeNode::Leaf { set: *set },
        TreeSpec::Node { children, shqp } => TreeNode::Internal { children: children.iter().map(build_tree).collect(), shqp: *shqp },
    }
}

fn check_blocks(what: &str, blocks: &[Vec<f64>], m: usize, n: usize) -> Result<(), LoadError> {
    if blocks.len() != m {
        return Err(LoadError::DimensionMismatch { what: format!("{what} (block count)"), expected: m, found: blocks.len() });
    }
    for (i, y) in blocks.iter().enumerate() {
        check_dim(format!("{what}[{i}]"), n, y)?;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(invalid(format!("{what}[{i}]"), "non-finite entry"));
        }
    }
    Ok(())
}

pub fn build_instance(file: &ProblemFile) -> Result<Instance, LoadError> {
    let n = file.d.len();
    if let Some(dim) = file.dimension {
        check_dim("d", dim, &file.d)?;
    }
    if file.sets.is_empty() {
        return Err(invalid("sets", "at least one set is required"));
    }
    let sets = file.sets.iter().enumerate().map(|(i, s)| build_set(i, s, n)).collect::<Result<Vec<_>, _>>()?;
    let problem = Problem::new(file.d.clone(), sets).map_err(|e| invalid("problem", e))?;
    let m = problem.len();

    let weights = match &file.weights {
        Some(w) => {
            if w.len() != m {
                return Err(LoadError::DimensionMismatch { what: "weights".into(), expected: m, found: w.len() });
            }
            Weights::new(w.clone()).map_err(|e| invalid("weights", e))?
        }
        None => Weights::uniform(m),
    };
    let opts = &file.options;
    let buffer_capacity = opts.buffer_capacity.unwrap_or(bestapprox::HalfspaceBuffer::DEFAULT_CAPACITY);
    let tree = match &file.tree {
        Some(spec) => TreeTopology::new(build_tree(spec), weights.clone()).map_err(|e| invalid("tree", e))?,
        None => TreeTopology::flat(weights.clone()),
    }
    .with_buffer_capacity(buffer_capacity);

    if let Some(r) = &file.reference {
        check_dim("reference", n, r)?;
    }
    if let Some(y) = &file.dual_reference {
        check_blocks("dual_reference", y, m, n)?;
    }

    let seed = opts.seed.unwrap_or(0);
    let warmstart = match (&opts.warmstart, opts.random_warmstart) {
        (Some(blocks), _) => {
            check_blocks("warmstart", blocks, m, n)?;
            blocks.clone()
        }
        (None, Some(radius)) => {
            if !(radius.is_finite() && radius >= 0.0) {
                return Err(invalid("options.random_warmstart", "must be a nonnegative number"));
            }
            random_blocks(seed, m, n, radius)
        }
        (None, None) => vec![vec![0.0; n]; m],
    };
    let positive = |what: &str, v: Option<f64>, default: f64| -> Result<f64, LoadError> {
        match v {
            Some(t) if !(t.is_finite() && t > 0.0) => Err(invalid(what, "must be positive")),
            Some(t) => Ok(t),
            None => Ok(default),
        }
    };
    let config = RunConfig {
        tolerance: positive("options.tolerance", opts.tolerance, 1e-8)?,
        dual_tolerance: positive("options.dual_tolerance", opts.dual_tolerance, 1e-10)?,
        max_sweeps: opts.max_sweeps.unwrap_or(100_000),
        buffer_capacity,
        shqp: opts.shqp_schedule.unwrap_or_default(),
        warmstart,
        seed,
        epsilon: opts.epsilon.map(|e| positive("options.epsilon", Some(e), 0.0)).transpose()?,
    };
    Ok(Instance {
        algorithm: file.algorithm,
        problem,
        weights,
        tree,
        reference: file.reference.clone(),
        dual_reference: file.dual_reference.clone(),
        config,
    })
}

/// Blocks in uniformly random directions with norms uniform in `[0, radius)`.
fn random_blocks(seed: u64, m: usize, n: usize, radius: f64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..m)
        .map(|_| {
            let v: Vec<f64> = loop {
                let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if r > 1e-3 {
                    break v.iter().map(|x| x / r).collect();
                }
            };
            let r = if radius > 0.0 { rng.gen_range(0.0..radius) } else { 0.0 };
            v.iter().map(|x| x * r).collect()
        })
        .collect()
}

/// Starting blocks from a JSON file holding an array of arrays.
pub fn read_warmstart(path: &Path) -> Result<Vec<Vec<f64>>, LoadError> {
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io { path: path.to_owned(), source })?;
    let mut de = serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(&mut de).map_err(|e| {
        if e.inner().is_syntax() || e.inner().is_eof() {
            return LoadError::Parse(e.inner().to_string());
        }
        let path = e.path().to_string();
        LoadError::Schema {
            path: format!("warmstart{}", if path == "." { String::new() } else { path }),
            message: e.inner().to_string(),
        }
    })
}
