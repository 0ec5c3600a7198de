mod common;

use bestapprox::dykstra::{dykstra_solve, DualState, SolveError, SolveOptions, StoppingRule};
use bestapprox::geometry::{ConvexSet, Halfspace};
use bestapprox::linalg::{dot, norm, norm_sq, sub, sum_blocks};
use bestapprox::problem::Problem;
use bestapprox::qp::{dual_decompose, project_polyhedron};
use common::*;
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn feasible_points(hs: &[Halfspace], p0: &[f64], rng: &mut ChaCha8Rng, count: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    while out.len() < count {
        let p: Vec<f64> = p0.iter().map(|x| x + rng.gen_range(-3.0..3.0)).collect();
        if hs.iter().all(|h| h.contains(&p, 0.0)) {
            out.push(p);
        }
    }
    out
}

/// `1/2 ||z - sum y_j||^2 + sum supp(y_j, H_j)` for blocks `y_j = mu_j a_j`.
fn decomposition_objective(hs: &[Halfspace], z: &[f64], blocks: &[Vec<f64>]) -> f64 {
    let r = sub(z, &sum_blocks(blocks, z.len()));
    let supp: f64 = hs
        .iter()
        .zip(blocks)
        .map(|(h, y)| dot(h.normal(), y) * h.offset())
        .sum();
    0.5 * norm_sq(&r) + supp
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projection_beats_feasible_points(seed in any::<u64>(), n in 1usize..7, k in 1usize..9) {
        let mut rng = rng(seed);
        let (hs, p0) = feasible_halfspaces(&mut rng, n, k);
        let z = far_point(&mut rng, &p0);
        let x = project_polyhedron(&hs, &z).unwrap().x;
        for h in &hs {
            prop_assert!(h.violation(&x) <= 1e-10);
        }
        for p in feasible_points(&hs, &p0, &mut rng, 200) {
            prop_assert!(norm(&sub(&x, &z)) <= norm(&sub(&p, &z)) + 1e-10);
        }
    }

    #[test]
    fn decomposition_minimizes_dual(seed in any::<u64>(), n in 1usize..7, k in 1usize..9) {
        let mut rng = rng(seed);
        let (hs, p0) = feasible_halfspaces(&mut rng, n, k);
        let z = far_point(&mut rng, &p0);
        let blocks = dual_decompose(&hs, &z).unwrap();
        let best = decomposition_objective(&hs, &z, &blocks);
        for _ in 0..100 {
            let cand: Vec<Vec<f64>> = hs
                .iter()
                .map(|h| {
                    let mu = rng.gen_range(0.0..3.0);
                    h.normal().iter().map(|a| mu * a).collect()
                })
                .collect();
            prop_assert!(best <= decomposition_objective(&hs, &z, &cand) + 1e-10);
        }
    }

    #[test]
    fn projection_is_idempotent(seed in any::<u64>(), n in 1usize..7, k in 1usize..9) {
        let mut rng = rng(seed);
        let (hs, p0) = feasible_halfspaces(&mut rng, n, k);
        let x = project_polyhedron(&hs, &far_point(&mut rng, &p0)).unwrap().x;
        let again = project_polyhedron(&hs, &x).unwrap().x;
        prop_assert!(norm(&sub(&again, &x)) <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn matches_cyclic_projections(seed in any::<u64>(), n in 1usize..7, k in 1usize..9) {
        let mut rng = rng(seed);
        let (hs, p0) = feasible_halfspaces(&mut rng, n, k);
        let z = far_point(&mut rng, &p0);
        let qp = project_polyhedron(&hs, &z).unwrap().x;
        let p = Problem::new(z, hs.into_iter().map(ConvexSet::Halfspace).collect()).unwrap();
        let rule = StoppingRule { primal_tol: 1e-13, dual_tol: 1e-14, max_sweeps: 100_000 };
        let x = match dykstra_solve(&p, DualState::zeros(&p), &SolveOptions::with_rule(rule)) {
            Ok(s) => s.state.primal,
            Err(SolveError::MaxSweepsExceeded(s)) => s.state.primal,
            Err(e) => panic!("{e}"),
        };
        prop_assert!(norm(&sub(&x, &qp)) <= 1e-6);
    }
}
