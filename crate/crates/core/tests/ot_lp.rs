mod common;

use brenier_ot::ot_lp::{build_cost, solve, verify_slackness, DualPair};
use brenier_ot::PointCloudMeasure;
use common::*;
use proptest::prelude::*;

#[test]
fn permutation_oracle_small_instances() {
    let mut r = rng(101);
    for trial in 0..100 {
        let n = 1 + trial % 6;
        let d = 1 + trial % 3;
        let x = random_points(&mut r, n, d, 1.0);
        let y = random_points(&mut r, n, d, 1.0);
        let mu = PointCloudMeasure::uniform(d, x.clone()).unwrap();
        let nu = PointCloudMeasure::uniform(d, y.clone()).unwrap();
        let sol = solve(&mu, &nu).unwrap();
        let (best, perm) = best_permutation(&x, &y);
        assert!((sol.primal_value - best).abs() <= 1e-12, "trial {trial}: {} vs {best}", sol.primal_value);
        assert_eq!(sol.plan.as_permutation().unwrap(), perm, "trial {trial}");
    }
}

#[test]
fn monotone_plan_on_the_line() {
    let mu = PointCloudMeasure::uniform(1, vec![vec![0.0], vec![2.0]]).unwrap();
    let nu = PointCloudMeasure::uniform(1, vec![vec![1.0], vec![3.0]]).unwrap();
    let sol = solve(&mu, &nu).unwrap();
    assert!((sol.primal_value - 0.5).abs() < 1e-15);
    assert_eq!(sol.plan.as_permutation().unwrap(), vec![0, 1]);
}

#[test]
fn slackness_report_detects_perturbations() {
    let mut r = rng(7);
    let mu = random_measure(&mut r, 8, 2, false);
    let nu = random_measure(&mut r, 6, 2, false);
    let cost = build_cost(&mu, &nu).unwrap();
    let mut sol = solve(&mu, &nu).unwrap();
    let rep = verify_slackness(&sol, &cost).unwrap();
    assert!(rep.max_active_residual <= 1e-8 && rep.max_dual_violation <= 1e-8);

    let (i, _, _) = sol.plan.cells()[0];
    sol.duals.f[i] += 1e-3;
    let rep = verify_slackness(&sol, &cost).unwrap();
    assert!(rep.max_active_residual >= 1e-3 - 1e-9);

    sol.duals = DualPair::new(vec![10.0; 8], vec![10.0; 6]);
    assert!(verify_slackness(&sol, &cost).unwrap().max_dual_violation > 19.0);
}

#[test]
fn zero_cost_instance() {
    let mut r = rng(8);
    let mu = random_measure(&mut r, 12, 3, false);
    let sol = solve(&mu, &mu).unwrap();
    assert!(sol.primal_value.abs() < 1e-15);
    assert_eq!(sol.plan.support_size(), 12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn solutions_are_feasible_and_optimal(seed in 0u64..10_000, n in 1usize..30, m in 1usize..30, d in 1usize..4) {
        let mut r = rng(seed);
        let mu = random_measure(&mut r, n, d, false);
        let nu = random_measure(&mut r, m, d, seed % 2 == 0);
        let cost = build_cost(&mu, &nu).unwrap();
        let sol = solve(&mu, &nu).unwrap();
        let rep = verify_slackness(&sol, &cost).unwrap();
        prop_assert!(rep.max_marginal_residual <= 1e-10);
        prop_assert!(rep.max_active_residual <= 1e-8);
        prop_assert!(rep.max_dual_violation <= 1e-9);
        prop_assert!(sol.duality_gap().abs() <= 1e-9 * (1.0 + sol.primal_value.abs()));
        prop_assert!(sol.plan.support_size() < n + m);
        prop_assert_eq!(*sol.duals.g.last().unwrap(), 0.0);
        prop_assert!(cost.entries().iter().all(|&c| c >= 0.0));
    }

    #[test]
    fn dual_shift_keeps_objective(seed in 0u64..10_000, c in -5.0f64..5.0) {
        let mut r = rng(seed);
        let mu = random_measure(&mut r, 7, 2, false);
        let nu = random_measure(&mut r, 5, 2, false);
        let sol = solve(&mu, &nu).unwrap();
        let base = sol.duals.objective(mu.weights(), nu.weights());
        let shifted = sol.duals.shifted(c).objective(mu.weights(), nu.weights());
        prop_assert!((base - shifted).abs() <= 1e-12 * (1.0 + c.abs()));
    }
}
