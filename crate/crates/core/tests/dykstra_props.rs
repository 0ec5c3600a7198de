mod common;

use bestapprox::diagnostics::{appendix_monitor, objective_series, optimal_value};
use bestapprox::dykstra::{
    dual_objective, dykstra_solve, extended_dykstra_solve, v_function, DualState, ExtendedOptions, Solution,
    SolveError, SolveOptions, StoppingRule,
};
use bestapprox::linalg::{norm_sq, sub};
use common::*;
use proptest::prelude::*;

fn solution(r: Result<Solution, SolveError>) -> Solution {
    match r {
        Ok(s) => s,
        Err(SolveError::MaxSweepsExceeded(s)) => *s,
        Err(e) => panic!("{e}"),
    }
}

fn sweeps(k: usize) -> SolveOptions {
    SolveOptions::with_rule(StoppingRule { max_sweeps: k, ..StoppingRule::default() })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn plain_dual_objective_decreases(seed in any::<u64>(), n in 2usize..6, m in 2usize..6) {
        let p = mixed_instance(seed, n, m);
        let mut rng = rng(seed);
        let start = DualState::warm(&p, random_blocks(&mut rng, m, n, 5.0)).unwrap();
        let sol = solution(dykstra_solve(&p, start, &sweeps(500)));
        let h = objective_series(&sol.trace);
        for (k, w) in h.windows(2).enumerate() {
            let half: f64 = 0.5 * sol.trace.sweeps[k].block_changes.iter().map(|c| c * c).sum::<f64>();
            prop_assert!(w[1] <= w[0] + 1e-10);
            prop_assert!(w[0] - w[1] >= half - 1e-10);
        }
    }

    #[test]
    fn extended_sweep_inequality(seed in any::<u64>(), n in 2usize..6, m in 2usize..6, cap in 0usize..8) {
        let p = mixed_instance(seed, n, m);
        let ext = ExtendedOptions { buffer_capacity: cap, ..ExtendedOptions::default() };
        let sol = solution(extended_dykstra_solve(&p, DualState::zeros(&p), &ext, &sweeps(500)));
        let h = objective_series(&sol.trace);
        for (k, r) in sol.trace.sweeps.iter().enumerate() {
            let half: f64 = 0.5 * r.block_changes.iter().map(|c| c * c).sum::<f64>();
            prop_assert!(h[k] >= h[k + 1] + half - 1e-10, "sweep {}: {} < {} + {}", k + 1, h[k], h[k + 1], half);
        }
    }

    #[test]
    fn block_change_budget(seed in any::<u64>(), n in 2usize..5, m in 2usize..6, extended in any::<bool>()) {
        let inst = polyhedral_instance(seed, n, m);
        let p = &inst.problem;
        let budget = 2.0 * (dual_objective(p, &DualState::zeros(p).blocks).unwrap() - optimal_value(&p.d, &inst.xbar));
        let opts = SolveOptions::with_rule(StoppingRule { primal_tol: -1.0, dual_tol: 0.0, max_sweeps: 1000 });
        let sol = if extended {
            solution(extended_dykstra_solve(p, DualState::zeros(p), &ExtendedOptions::default(), &opts))
        } else {
            solution(dykstra_solve(p, DualState::zeros(p), &opts))
        };
        let total: f64 = sol.trace.sweeps.iter().flat_map(|r| r.block_changes.iter().map(|c| c * c)).sum();
        prop_assert!(total <= budget + 1e-6, "{} > {}", total, budget);
    }

    #[test]
    fn inner_steps_satisfy_recovery_and_monitors(seed in any::<u64>(), n in 2usize..5, m in 2usize..5, extended in any::<bool>()) {
        let inst = polyhedral_instance(seed, n, m);
        let p = &inst.problem;
        let mut rng = rng(seed ^ 0x5eed);
        let start = DualState::warm(p, random_blocks(&mut rng, m, n, 10.0)).unwrap();
        let mut opts = sweeps(2000);
        opts.record_inner = true;
        let sol = if extended {
            solution(extended_dykstra_solve(p, start, &ExtendedOptions::default(), &opts))
        } else {
            solution(dykstra_solve(p, start, &opts))
        };
        let rep = appendix_monitor(p, &sol.trace, &inst.xbar).unwrap();
        prop_assert!(rep.recovery_error <= 1e-10);
        for w in rep.v.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-10);
        }
        for (v, half) in rep.v.iter().zip(&rep.half_dist_sq) {
            prop_assert!(*v >= half - 1e-10);
        }
        prop_assert!(rep.increment_sum().is_finite());
        prop_assert!(rep.increments.last().is_none_or(|i| i.sqrt() < 1e-4));
    }

    #[test]
    fn v_bounds_primal_distance(seed in any::<u64>(), n in 2usize..5, m in 2usize..5) {
        let inst = polyhedral_instance(seed, n, m);
        let p = &inst.problem;
        let mut opts = sweeps(300);
        opts.record_blocks = true;
        let sol = solution(dykstra_solve(p, DualState::zeros(p), &opts));
        for r in &sol.trace.sweeps {
            let blocks = r.blocks.as_ref().unwrap();
            let v = v_function(p, blocks, &[], &inst.xbar).unwrap();
            prop_assert!(v >= 0.5 * norm_sq(&sub(&r.primal, &inst.xbar)) - 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn warmstarts_share_the_limit(seed in any::<u64>(), n in 2usize..5, m in 2usize..5) {
        let p = mixed_instance(seed, n, m);
        let tight = SolveOptions::with_rule(StoppingRule { primal_tol: 1e-10, dual_tol: 1e-12, max_sweeps: 100_000 });
        let reference = solution(dykstra_solve(&p, DualState::zeros(&p), &tight)).state.primal;
        let mut rng = rng(seed);
        for _ in 0..10 {
            let blocks = random_blocks(&mut rng, m, n, 10.0);
            let a = solution(dykstra_solve(&p, DualState::warm(&p, blocks.clone()).unwrap(), &tight));
            let b = solution(extended_dykstra_solve(&p, DualState::warm(&p, blocks).unwrap(), &ExtendedOptions::default(), &tight));
            prop_assert!(dist(&a.state.primal, &reference) <= 1e-6);
            prop_assert!(dist(&b.state.primal, &reference) <= 1e-6);
        }
    }
}

#[test]
fn growth_is_flagged_on_tangent_disks() {
    let p = tangent_disks();
    let opts = SolveOptions::with_rule(StoppingRule { primal_tol: -1.0, dual_tol: 0.0, max_sweeps: 10_000 });
    let sol = solution(dykstra_solve(&p, DualState::zeros(&p), &opts));
    assert!(sol.trace.growth_flagged);
    let first = sol.trace.sweeps.iter().find(|r| r.growth_flag).unwrap().sweep;
    assert!(first <= 10_000);
}

#[test]
fn growth_is_not_flagged_on_two_halfspaces() {
    let p = two_halfspaces();
    let opts = SolveOptions::with_rule(StoppingRule { primal_tol: -1.0, dual_tol: 0.0, max_sweeps: 3000 });
    let sol = solution(dykstra_solve(&p, DualState::zeros(&p), &opts));
    assert!(!sol.trace.growth_flagged);
}
