mod common;

use brenier_ot::ot_lp::solve;
use brenier_ot::{BrenierPotential, SemiDual};
use common::*;
use rand::Rng;

fn lp_reference(sd: &SemiDual) -> f64 {
    let sol = solve(sd.source(), sd.target()).unwrap();
    sd.moment_term() - sol.primal_value
}

#[test]
fn agrees_with_the_lp_route() {
    let mut r = rng(31);
    for trial in 0..50 {
        let d = 1 + trial % 3;
        let (n, m) = (r.random_range(1..100), r.random_range(1..30));
        let mu = random_measure(&mut r, n, d, trial % 2 == 0);
        let nu = random_measure(&mut r, m, d, false);
        let radius = mu.support_radius().max(nu.support_radius());
        let sd = SemiDual::new(mu, nu).unwrap();
        let sol = sd.minimize(None, 1e-10, 50_000).unwrap();
        let reference = lp_reference(&sd);
        assert!((sol.objective - reference).abs() <= 1e-6, "trial {trial}: {} vs {reference}", sol.objective);
        assert_eq!(*sol.g.last().unwrap(), 0.0);
        let phi = sd.potential(&sol.g).unwrap().tighten().normalized();
        for g in phi.offsets() {
            assert!(g.abs() <= 3.0 * radius * radius + 1e-6);
        }
    }
}

#[test]
fn subgradient_matches_central_differences() {
    let mut r = rng(32);
    let mut checked = 0;
    while checked < 100 {
        let d = r.random_range(1..4);
        let (n, m) = (r.random_range(5..60), r.random_range(2..8));
        let mu = random_measure(&mut r, n, d, false);
        let nu = random_measure(&mut r, m, d, false);
        let g: Vec<f64> = (0..m).map(|_| r.random_range(-0.5..0.5)).collect();
        let phi = BrenierPotential::from_dual(&nu, &g).unwrap();
        let margin = mu
            .points()
            .map(|x| {
                let mut v: Vec<f64> = (0..m).map(|k| phi.piece(k, x)).collect();
                v.sort_by(|a, b| b.total_cmp(a));
                v[0] - v[1]
            })
            .fold(f64::INFINITY, f64::min);
        if margin < 1e-3 {
            continue;
        }
        checked += 1;
        let sd = SemiDual::new(mu, nu).unwrap();
        let grad = sd.subgradient(&g).unwrap();
        let h = 1e-5;
        for k in 0..m {
            let mut up = g.clone();
            let mut down = g.clone();
            up[k] += h;
            down[k] -= h;
            let fd = (sd.objective(&up).unwrap() - sd.objective(&down).unwrap()) / (2.0 * h);
            assert!((fd - grad[k]).abs() <= 1e-6, "{fd} vs {}", grad[k]);
        }
    }
}

#[test]
fn objective_is_convex_and_shift_invariant() {
    let mut r = rng(33);
    for _ in 0..100 {
        let d = r.random_range(1..3);
        let mu = random_measure(&mut r, 30, d, true);
        let nu = random_measure(&mut r, 6, d, false);
        let sd = SemiDual::new(mu, nu).unwrap();
        let a: Vec<f64> = (0..6).map(|_| r.random_range(-2.0..2.0)).collect();
        let b: Vec<f64> = (0..6).map(|_| r.random_range(-2.0..2.0)).collect();
        let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
        let (fa, fb, fm) = (sd.objective(&a).unwrap(), sd.objective(&b).unwrap(), sd.objective(&mid).unwrap());
        assert!(fm <= 0.5 * (fa + fb) + 1e-12);
        let c = r.random_range(-3.0..3.0);
        let shifted: Vec<f64> = a.iter().map(|v| v + c).collect();
        assert!((sd.objective(&shifted).unwrap() - fa).abs() <= 1e-12);
    }
}

#[test]
fn lp_warm_start_converges_quickly() {
    let mut r = rng(34);
    for _ in 0..20 {
        let mu = random_measure(&mut r, 40, 2, true);
        let nu = random_measure(&mut r, 7, 2, false);
        let sol = solve(&mu, &nu).unwrap();
        let g = BrenierPotential::from_solution(&nu, &sol).unwrap().tighten().normalized().offsets().to_vec();
        let sd = SemiDual::new(mu, nu).unwrap();
        let out = sd.minimize(Some(&g), 1e-10, 1000).unwrap();
        assert!(out.iterations <= 5, "{} iterations", out.iterations);
        assert!((out.objective - lp_reference(&sd)).abs() <= 1e-9);
    }
}

#[test]
fn target_equal_to_source() {
    let mut r = rng(35);
    let mu = random_measure(&mut r, 15, 2, false);
    let sd = SemiDual::new(mu.clone(), mu).unwrap();
    let out = sd.minimize(None, 1e-12, 10_000).unwrap();
    assert!((out.objective - sd.moment_term()).abs() <= 1e-9);
}
