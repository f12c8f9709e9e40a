mod common;

use brenier_ot::experiments::Oracle1d;
use brenier_ot::measures::DistributionSpec;
use brenier_ot::metrics::{
    carlier_remainder, coupling_w2, covering_check, dual_gap, error_bound_check, fenchel_young_gap, wasserstein,
    BoundConstants, CouplingMeasure,
};
use brenier_ot::{BrenierPotential, PointCloudMeasure};
use common::*;
use rand::Rng;

#[test]
fn triangle_inequality() {
    let mut r = rng(41);
    for _ in 0..60 {
        let d = r.random_range(1..4);
        let (na, nb, nc) = (r.random_range(1..20), r.random_range(1..20), r.random_range(1..20));
        let a = random_measure(&mut r, na, d, false);
        let b = random_measure(&mut r, nb, d, false);
        let c = random_measure(&mut r, nc, d, false);
        for order in [1, 2] {
            let ab = wasserstein(&a, &b, order).unwrap();
            let bc = wasserstein(&b, &c, order).unwrap();
            let ac = wasserstein(&a, &c, order).unwrap();
            assert!(ab + bc - ac >= -1e-9);
        }
    }
}

fn two_pairs(r: &mut brenier_ot::measures::StreamRng) -> CouplingMeasure<f64> {
    let coords: Vec<f64> = (0..4).map(|_| r.random_range(-1.0..1.0)).collect();
    let w = r.random_range(0.05..0.95);
    CouplingMeasure::from_pairs(2, coords, vec![w, 1.0 - w]).unwrap()
}

#[test]
fn coupling_distance_on_two_by_two_supports() {
    let mut r = rng(42);
    for _ in 0..200 {
        let (a, b) = (two_pairs(&mut r), two_pairs(&mut r));
        let (pa, pb) = (a.as_measure(), b.as_measure());
        let c = |i: usize, j: usize| {
            let (x, y) = (pa.point(i), pb.point(j));
            (x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)
        };
        let (a1, b1) = (pa.weight(0), pb.weight(0));
        // the two vertices of the 2×2 transportation polytope
        let best = [(a1 - pb.weight(1)).max(0.0), a1.min(b1)]
            .iter()
            .map(|&p11| {
                let (p12, p21) = (a1 - p11, b1 - p11);
                let p22 = 1.0 - p11 - p12 - p21;
                p11 * c(0, 0) + p12 * c(0, 1) + p21 * c(1, 0) + p22 * c(1, 1)
            })
            .fold(f64::INFINITY, f64::min);
        let w = coupling_w2(&a, &b).unwrap();
        assert!((w * w - best).abs() <= 1e-12, "{} vs {best}", w * w);
        assert!((coupling_w2(&b, &a).unwrap() - w).abs() <= 1e-12);
        assert!(coupling_w2(&a, &a).unwrap() <= 1e-10);
    }
}

#[test]
fn carlier_inequality_randomized() {
    let mut r = rng(43);
    for _ in 0..2000 {
        let d = r.random_range(1..4);
        let m = r.random_range(1..10);
        let phi = random_potential(&mut r, m, d);
        let x: Vec<f64> = (0..d).map(|_| r.random_range(-2.0..2.0)).collect();
        let mut p = vec![0.0; d];
        let w = random_weights(&mut r, m);
        for (k, wk) in w.iter().enumerate() {
            for (pi, yi) in p.iter_mut().zip(phi.atom(k)) {
                *pi += wk * yi;
            }
        }
        let lambda = r.random_range(0.01..5.0);
        let (lhs, rhs) = carlier_remainder(&phi, &x, &p, lambda).unwrap();
        assert!(lhs >= rhs - 1e-8, "{lhs} < {rhs}");
    }
}

#[test]
fn covering_random_planar_potentials() {
    let mut r = rng(44);
    for _ in 0..10 {
        let m = r.random_range(1..21);
        let phi = random_potential(&mut r, m, 2);
        let eta = r.random_range(0.08..0.2);
        let alpha = r.random_range(0.1..1.0);
        let rep = covering_check(&phi, 1.0, eta, alpha, eta / 4.0).unwrap();
        assert!(rep.holds(), "{rep:?}");
    }
}

fn three_atom_oracle() -> (DistributionSpec, PointCloudMeasure, Oracle1d) {
    let mu = DistributionSpec::interval(-1.0, 1.0);
    let nu_spec = DistributionSpec::atoms(vec![vec![-0.5], vec![0.2], vec![0.9]], vec![0.3, 0.3, 0.4]);
    let nu = nu_spec.quadrature(1).unwrap();
    let oracle = Oracle1d::new(&mu, &nu_spec).unwrap();
    (mu, nu, oracle)
}

#[test]
fn dual_gap_examples() {
    let (mu, nu, oracle) = three_atom_oracle();
    let grid = mu.quadrature(20_000).unwrap();
    let exact = oracle.semidiscrete_potential().unwrap().clone();
    assert!(dual_gap(&exact, &oracle, &grid, &nu).abs() <= 1e-12);
    assert!(dual_gap(&exact.shifted(0.7), &oracle, &grid, &nu).abs() <= 1e-12);
    let mut g = exact.offsets().to_vec();
    g[0] += 0.1;
    let off = BrenierPotential::new(1, exact.atoms().map(|a| a.to_vec()).collect(), g).unwrap();
    assert!(dual_gap(&off, &oracle, &grid, &nu) > 1e-4);
    assert!(fenchel_young_gap(&off, &oracle, &grid).0 > 1e-4);
}

#[test]
fn huge_gap_lands_in_the_first_regime() {
    let mu = DistributionSpec::interval(-1.0, 1.0);
    let nu_spec = DistributionSpec::atoms(vec![vec![-1.0], vec![0.0], vec![1.0]], vec![1.0 / 3.0; 3]);
    let oracle = Oracle1d::new(&mu, &nu_spec).unwrap();
    // pieces −x, −1000 and x − 2000: only −x is active on the support
    let phi = BrenierPotential::new(1, vec![vec![-1.0], vec![0.0], vec![1.0]], vec![0.5, -1000.0, 0.5 - 2000.0]).unwrap();
    let samples = mu.quadrature(100_000).unwrap();
    for q in [1.0, 1.5, 2.0] {
        let consts = BoundConstants::new(1.0, 0.5, 1, q, 1.0).unwrap();
        let rep = error_bound_check(&phi, &oracle, &samples, &consts);
        assert!(rep.delta > rep.threshold, "{rep:?}");
        assert_eq!(rep.case, 1);
        assert!(rep.holds && rep.l1_holds, "{rep:?}");
        assert!((rep.l1_distance - 1.0).abs() < 1e-3);
    }
}

#[test]
fn exact_potential_has_zero_error() {
    let (mu, _, oracle) = three_atom_oracle();
    let samples = brenier_ot::measures::sample::<f64>(&mu, 10_000, 3).unwrap();
    let exact = oracle.semidiscrete_potential().unwrap().clone();
    let consts = BoundConstants::new(1.0, 0.5, 1, 1.0, 1.0).unwrap();
    let rep = error_bound_check(&exact, &oracle, &samples, &consts);
    assert_eq!(rep.lhs, 0.0);
    assert!(rep.delta <= 1e-12 && rep.holds && rep.l1_holds);
}
