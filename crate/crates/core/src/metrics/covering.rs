use std::f64::consts::PI;

use serde::Serialize;

use crate::brenier::BrenierPotential;
use crate::error::{Error, Result};
use crate::scalar::dist_sq;

/// Greedy cover of the detected singular set against the covering-number bound.
#[derive(Clone, Debug, Serialize)]
pub struct CoveringReport {
    pub grid_points: usize,
    /// Grid points where the sampled subdifferential image of `B(x, η)` has diameter `≥ α`.
    pub singular_points: usize,
    /// Number of radius-`8η` balls used by the greedy cover.
    pub estimated_count: usize,
    /// `48 d² (R + 4η)^{d−1} Lip(φ) / (α η^{d−1})`.
    pub covering_bound: f64,
}

impl CoveringReport {
    pub fn holds(&self) -> bool {
        self.estimated_count as f64 <= self.covering_bound
    }
}

/// 32 offsets spread over the closed ball of radius `eta`.
fn ball_pattern(d: usize, eta: f64) -> Vec<Vec<f64>> {
    match d {
        1 => (0..32).map(|k| vec![eta * (2.0 * k as f64 / 31.0 - 1.0)]).collect(),
        2 => (0..32)
            .map(|k| {
                let ring = (k / 8 + 1) as f64 / 4.0;
                let angle = 2.0 * PI * (k % 8) as f64 / 8.0 + ring * PI / 8.0;
                vec![eta * ring * angle.cos(), eta * ring * angle.sin()]
            })
            .collect(),
        _ => {
            // Fibonacci sphere directions on four shells
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..32)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / 32.0;
                    let rho = (1.0 - z * z).sqrt();
                    let theta = golden * k as f64;
                    let shell = eta * ((k % 4) + 1) as f64 / 4.0;
                    vec![shell * rho * theta.cos(), shell * rho * theta.sin(), shell * z]
                })
                .collect()
        }
    }
}

/// Estimates the covering number `N(Σ_{η,α} ∩ B_R, 8η)` of the set where the
/// subdifferential of `φ` over `η`-balls has diameter at least `α`.
///
/// Grid points of spacing `grid_step` inside `B_R` are tested by collecting
/// the atoms active at the center and at 32 points of the ball; the points
/// found singular are then covered greedily by balls of radius `8η`.
pub fn covering_check(
    phi: &BrenierPotential<f64>,
    r: f64,
    eta: f64,
    alpha: f64,
    grid_step: f64,
) -> Result<CoveringReport> {
    let d = phi.dim();
    if d > 3 {
        return Err(Error::Invalid(format!("covering grids are limited to d ≤ 3, got {d}")));
    }
    if !(r > 0.0 && eta > 0.0 && alpha > 0.0 && grid_step > 0.0) {
        return Err(Error::Invalid("radius, η, α and grid step must be positive".into()));
    }
    if grid_step > eta / 4.0 * (1.0 + 1e-12) {
        return Err(Error::Invalid(format!("grid step {grid_step} exceeds η/4 = {}", eta / 4.0)));
    }
    let steps = (r / grid_step).floor() as i64;
    let side = (2 * steps + 1) as usize;
    let total = side.pow(d as u32);
    if total > 50_000_000 {
        return Err(Error::TooLarge(format!("{total} grid points")));
    }
    let pattern = ball_pattern(d, eta);
    let mut singular: Vec<Vec<f64>> = Vec::new();
    let mut grid_points = 0usize;
    let mut x = vec![0.0; d];
    let mut probe = vec![0.0; d];
    for flat in 0..total {
        let mut rem = flat;
        for xi in x.iter_mut() {
            *xi = ((rem % side) as i64 - steps) as f64 * grid_step;
            rem /= side;
        }
        if x.iter().map(|v| v * v).sum::<f64>() > r * r {
            continue;
        }
        grid_points += 1;
        let mut seen = vec![false; phi.len()];
        for k in phi.active_set(&x) {
            seen[k] = true;
        }
        for off in &pattern {
            for ((p, &c), &o) in probe.iter_mut().zip(&x).zip(off) {
                *p = c + o;
            }
            for k in phi.active_set(&probe) {
                seen[k] = true;
            }
        }
        let active: Vec<usize> = (0..phi.len()).filter(|&k| seen[k]).collect();
        let mut diam_sq = 0.0_f64;
        for (a, &i) in active.iter().enumerate() {
            for &j in &active[a + 1..] {
                diam_sq = diam_sq.max(dist_sq(phi.atom(i), phi.atom(j)));
            }
        }
        if diam_sq >= alpha * alpha {
            singular.push(x.clone());
        }
    }
    let reach = (8.0 * eta) * (8.0 * eta);
    let mut centers: Vec<&Vec<f64>> = Vec::new();
    for p in &singular {
        if !centers.iter().any(|c| dist_sq(c, p) <= reach) {
            centers.push(p);
        }
    }
    let df = d as f64;
    let covering_bound =
        48.0 * df * df * (r + 4.0 * eta).powi(d as i32 - 1) * phi.lipschitz() / (alpha * eta.powi(d as i32 - 1));
    Ok(CoveringReport {
        grid_points,
        singular_points: singular.len(),
        estimated_count: centers.len(),
        covering_bound,
    })
}
