#![allow(dead_code)]

use brenier_ot::measures::{stream, StreamRng};
use brenier_ot::{BrenierPotential, PointCloudMeasure};
use rand::Rng;

pub fn rng(seed: u64) -> StreamRng {
    stream(seed)
}

pub fn random_points(rng: &mut StreamRng, n: usize, d: usize, half_width: f64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(-half_width..half_width)).collect())
        .collect()
}

pub fn random_weights(rng: &mut StreamRng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

pub fn random_measure(rng: &mut StreamRng, n: usize, d: usize, uniform: bool) -> PointCloudMeasure {
    let pts = random_points(rng, n, d, 1.0);
    if uniform {
        PointCloudMeasure::uniform(d, pts).unwrap()
    } else {
        let w = random_weights(rng, n);
        PointCloudMeasure::new(d, pts, w).unwrap()
    }
}

pub fn random_potential(rng: &mut StreamRng, m: usize, d: usize) -> BrenierPotential {
    let atoms = random_points(rng, m, d, 1.0);
    let g = (0..m).map(|_| rng.random_range(-0.5..0.5)).collect();
    BrenierPotential::new(d, atoms, g).unwrap()
}

fn half_sq(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()
}

/// Cheapest assignment over all permutations (Heap's algorithm), with the
/// minimizing permutation.
pub fn best_permutation(x: &[Vec<f64>], y: &[Vec<f64>]) -> (f64, Vec<usize>) {
    let n = x.len();
    let mut p: Vec<usize> = (0..n).collect();
    let eval = |p: &[usize]| p.iter().enumerate().map(|(i, &j)| half_sq(&x[i], &y[j])).sum::<f64>() / n as f64;
    let mut best = (eval(&p), p.clone());
    let mut c = vec![0usize; n];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                p.swap(0, i);
            } else {
                p.swap(c[i], i);
            }
            let v = eval(&p);
            if v < best.0 {
                best = (v, p.clone());
            }
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    best
}
