#![allow(dead_code)]

use bestapprox::geometry::{ConvexSet, Halfspace};
use bestapprox::problem::Problem;
use bestapprox::qp::project_polyhedron;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

/// Random unit vector.
pub fn direction(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let v = uniform_vec(rng, n, -1.0, 1.0);
        let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if r > 0.1 {
            return v.iter().map(|x| x / r).collect();
        }
    }
}

/// `k` halfspaces whose boundaries pass within distance 1 of a common
/// feasible point `p0`.
pub fn feasible_halfspaces(rng: &mut ChaCha8Rng, n: usize, k: usize) -> (Vec<Halfspace>, Vec<f64>) {
    let p0 = uniform_vec(rng, n, -1.0, 1.0);
    let hs = (0..k)
        .map(|_| {
            let a = direction(rng, n);
            let b = a.iter().zip(&p0).map(|(a, p)| a * p).sum::<f64>() + rng.gen_range(0.0..1.0);
            Halfspace::new(a, b).unwrap()
        })
        .collect();
    (hs, p0)
}

/// Point well outside most of the given sets.
pub fn far_point(rng: &mut ChaCha8Rng, p0: &[f64]) -> Vec<f64> {
    let u = direction(rng, p0.len());
    let r = rng.gen_range(2.0..4.0);
    p0.iter().zip(&u).map(|(p, u)| p + r * u).collect()
}

/// Problem whose sets are single halfspaces, with `P_C(d)` from the QP.
pub struct OracleInstance {
    pub problem: Problem,
    pub halfspaces: Vec<Halfspace>,
    pub xbar: Vec<f64>,
    /// Dual minimizer `lambda_i a_i`; unique when the active normals are
    /// independent.
    pub y_star: Vec<Vec<f64>>,
}

pub fn polyhedral_instance(seed: u64, n: usize, m: usize) -> OracleInstance {
    let mut rng = rng(seed);
    let (hs, p0) = feasible_halfspaces(&mut rng, n, m);
    let d = far_point(&mut rng, &p0);
    let proj = project_polyhedron(&hs, &d).unwrap();
    let y_star = hs
        .iter()
        .zip(&proj.multipliers)
        .map(|(h, l)| h.normal().iter().map(|a| a * l).collect())
        .collect();
    let problem = Problem::new(d, hs.iter().cloned().map(ConvexSet::Halfspace).collect()).unwrap();
    OracleInstance { problem, halfspaces: hs, xbar: proj.x, y_star }
}

/// Halfspaces, balls and boxes, each containing a ball of radius 0.2 around a
/// common point, so the duals stay bounded.
pub fn mixed_instance(seed: u64, n: usize, m: usize) -> Problem {
    let mut rng = rng(seed);
    let p0 = uniform_vec(&mut rng, n, -1.0, 1.0);
    let sets = (0..m)
        .map(|i| match i % 3 {
            0 => {
                let a = direction(&mut rng, n);
                let b = a.iter().zip(&p0).map(|(a, p)| a * p).sum::<f64>() + rng.gen_range(0.2..1.0);
                ConvexSet::halfspace(a, b).unwrap()
            }
            1 => {
                let shift = direction(&mut rng, n);
                let s = rng.gen_range(0.0..1.0);
                let c: Vec<f64> = p0.iter().zip(&shift).map(|(p, u)| p + s * u).collect();
                ConvexSet::ball(c, s + rng.gen_range(0.2..1.0)).unwrap()
            }
            _ => {
                let lo = p0.iter().map(|p| p - rng.gen_range(0.2..1.0)).collect();
                let hi = p0.iter().map(|p| p + rng.gen_range(0.2..1.0)).collect();
                ConvexSet::boxed(lo, hi).unwrap()
            }
        })
        .collect();
    let d = far_point(&mut rng, &p0);
    Problem::new(d, sets).unwrap()
}

/// `m` blocks of dimension `n`, each with norm at most `max_norm`.
pub fn random_blocks(rng: &mut ChaCha8Rng, m: usize, n: usize, max_norm: f64) -> Vec<Vec<f64>> {
    (0..m)
        .map(|_| {
            let u = direction(rng, n);
            let r = rng.gen_range(0.0..max_norm);
            u.iter().map(|x| x * r).collect()
        })
        .collect()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn figure_one() -> Problem {
    Problem::new(
        vec![1.0, 1.0],
        vec![
            ConvexSet::hyperplane(vec![0.0, 1.0], 0.0).unwrap(),
            ConvexSet::halfspace(vec![0.01, -1.0], 0.0).unwrap(),
        ],
    )
    .unwrap()
}

pub fn two_halfspaces() -> Problem {
    Problem::new(
        vec![1.0, 1.0],
        vec![
            ConvexSet::halfspace(vec![1.0, 0.0], 0.0).unwrap(),
            ConvexSet::halfspace(vec![0.0, 1.0], 0.0).unwrap(),
        ],
    )
    .unwrap()
}

pub fn tangent_disks() -> Problem {
    Problem::new(
        vec![0.0, 1.0],
        vec![
            ConvexSet::ball(vec![-1.0, 0.0], 1.0).unwrap(),
            ConvexSet::ball(vec![1.0, 0.0], 1.0).unwrap(),
        ],
    )
    .unwrap()
}
