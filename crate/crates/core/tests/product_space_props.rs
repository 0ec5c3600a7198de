mod common;

use bestapprox::dykstra::{dykstra_solve, DualState, Solution, SolveError, SolveOptions, StoppingRule};
use bestapprox::product_space::{
    lift_warmstart, product_lift, simultaneous_dykstra_solve, tree_dykstra_solve, TreeNode, TreeTopology, Weights,
};
use common::*;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn solution(r: Result<Solution, SolveError>) -> Solution {
    match r {
        Ok(s) => s,
        Err(SolveError::MaxSweepsExceeded(s)) => *s,
        Err(e) => panic!("{e}"),
    }
}

fn fixed(k: usize) -> SolveOptions {
    SolveOptions::with_rule(StoppingRule { primal_tol: -1.0, dual_tol: 0.0, max_sweeps: k })
}

fn random_weights(rng: &mut ChaCha8Rng, m: usize) -> Weights {
    let raw: Vec<f64> = (0..m).map(|_| rng.gen_range(0.2..2.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut w: Vec<f64> = raw.iter().map(|r| r / total).collect();
    let rest: f64 = w[1..].iter().sum();
    w[0] = 1.0 - rest;
    Weights::new(w).unwrap()
}

/// Random nesting of the leaves `0..m`, with random SHQP flags.
fn random_tree(rng: &mut ChaCha8Rng, m: usize) -> TreeNode {
    let mut nodes: Vec<TreeNode> = (0..m).map(|set| TreeNode::Leaf { set }).collect();
    nodes.shuffle(rng);
    while nodes.len() > 1 {
        let k = rng.gen_range(2..=nodes.len().min(3));
        let children: Vec<TreeNode> = nodes.drain(..k).collect();
        let at = rng.gen_range(0..=nodes.len());
        nodes.insert(at, TreeNode::Internal { children, shqp: rng.gen_bool(0.5) });
    }
    match nodes.pop().unwrap() {
        leaf @ TreeNode::Leaf { .. } => TreeNode::Internal { children: vec![leaf], shqp: false },
        node => node,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn simultaneous_equals_lifted_cyclic(seed in any::<u64>(), n in 2usize..7, m in 2usize..5) {
        let p = mixed_instance(seed, n, m);
        let mut rng = rng(seed);
        let w = random_weights(&mut rng, m);
        let y0 = random_blocks(&mut rng, m, n, 3.0);
        let mut opts = fixed(100);
        opts.record_blocks = true;
        let sim = solution(simultaneous_dykstra_solve(&p, &w, DualState::warm(&p, y0.clone()).unwrap(), &opts));
        let lifted = product_lift(&p, &w).unwrap();
        let lift = solution(dykstra_solve(&lifted, lift_warmstart(&p, &w, &y0).unwrap(), &opts));
        prop_assert_eq!(sim.trace.sweeps.len(), lift.trace.sweeps.len());
        for (rs, rl) in sim.trace.sweeps.iter().zip(&lift.trace.sweeps) {
            for i in 0..m {
                prop_assert!(dist(&rs.primal, &rl.primal[i * n..(i + 1) * n]) <= 1e-12);
                let ys = &rs.blocks.as_ref().unwrap()[i];
                let yl = &rl.blocks.as_ref().unwrap()[0][i * n..(i + 1) * n];
                prop_assert!(dist(ys, yl) <= 1e-12);
            }
            // w_i = d - x - y_i averages to zero
            let mut mean = p.d.clone();
            for (c, x) in mean.iter_mut().zip(&rs.primal) {
                *c -= x;
            }
            for (wi, y) in w.as_slice().iter().zip(rs.blocks.as_ref().unwrap()) {
                for (c, v) in mean.iter_mut().zip(y) {
                    *c -= wi * v;
                }
            }
            prop_assert!(mean.iter().map(|v| v * v).sum::<f64>().sqrt() <= 1e-10);
        }
    }

    #[test]
    fn tree_average_is_weighted_mean(seed in any::<u64>(), n in 1usize..5, m in 1usize..8) {
        let mut rng = rng(seed);
        let w = random_weights(&mut rng, m);
        let t = TreeTopology::new(random_tree(&mut rng, m), w.clone()).unwrap();
        let pts: Vec<Vec<f64>> = (0..m).map(|_| uniform_vec(&mut rng, n, -5.0, 5.0)).collect();
        let avg = t.average(&pts);
        let mut direct = vec![0.0; n];
        for (wi, p) in w.as_slice().iter().zip(&pts) {
            for (d, x) in direct.iter_mut().zip(p) {
                *d += wi * x;
            }
        }
        prop_assert!(dist(&avg, &direct) <= 1e-12);
        prop_assert!((t.node_weight(t.root()) - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn flat_tree_is_simultaneous(seed in any::<u64>(), n in 2usize..6, m in 2usize..5) {
        let p = mixed_instance(seed, n, m);
        let mut rng = rng(seed);
        let w = random_weights(&mut rng, m);
        let a = solution(simultaneous_dykstra_solve(&p, &w, DualState::zeros(&p), &fixed(50)));
        let b = solution(tree_dykstra_solve(&p, &TreeTopology::flat(w), DualState::zeros(&p), &fixed(50)));
        for (ra, rb) in a.trace.sweeps.iter().zip(&b.trace.sweeps) {
            prop_assert!(dist(&ra.primal, &rb.primal) <= 1e-14);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    #[test]
    fn product_solvers_reach_the_projection(seed in any::<u64>(), n in 2usize..5, m in 2usize..5) {
        let inst = polyhedral_instance(seed, n, m);
        let p = &inst.problem;
        let mut rng = rng(seed);
        let w = random_weights(&mut rng, m);
        let rule = StoppingRule { primal_tol: 1e-11, dual_tol: 1e-12, max_sweeps: 200_000 };
        let opts = SolveOptions::with_rule(rule);
        let sim = solution(simultaneous_dykstra_solve(p, &w, DualState::zeros(p), &opts));
        prop_assert!(dist(&sim.state.primal, &inst.xbar) <= 1e-6, "simultaneous {:?}", sim.state.primal);
        let t = TreeTopology::new(random_tree(&mut rng, m), w).unwrap();
        let tree = solution(tree_dykstra_solve(p, &t, DualState::zeros(p), &opts));
        prop_assert!(dist(&tree.state.primal, &inst.xbar) <= 1e-6, "tree {:?}", tree.state.primal);
        let h = bestapprox::diagnostics::objective_series(&tree.trace);
        for w in h.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-10);
        }
    }

    #[test]
    fn bounded_duals_transfer(seed in any::<u64>(), n in 2usize..5, m in 2usize..5) {
        let p = mixed_instance(seed, n, m);
        let a = solution(dykstra_solve(&p, DualState::zeros(&p), &fixed(10_000)));
        let b = solution(simultaneous_dykstra_solve(&p, &Weights::uniform(m), DualState::zeros(&p), &fixed(10_000)));
        prop_assert_eq!(a.trace.growth_flagged, b.trace.growth_flagged);
        prop_assert!(!a.trace.growth_flagged);
    }
}

#[test]
fn unbounded_duals_transfer() {
    let p = tangent_disks();
    let a = solution(dykstra_solve(&p, DualState::zeros(&p), &fixed(10_000)));
    let b = solution(simultaneous_dykstra_solve(&p, &Weights::uniform(2), DualState::zeros(&p), &fixed(10_000)));
    assert!(a.trace.growth_flagged);
    assert!(b.trace.growth_flagged);
}

#[test]
fn parallel_sweeps_match_serial() {
    let p = mixed_instance(7, 4, 5);
    let w = Weights::uniform(5);
    let serial = solution(simultaneous_dykstra_solve(&p, &w, DualState::zeros(&p), &fixed(40)));
    let mut opts = fixed(40);
    opts.parallel = true;
    let par = solution(simultaneous_dykstra_solve(&p, &w, DualState::zeros(&p), &opts));
    assert_eq!(serial.trace.sweeps, par.trace.sweeps);
}
