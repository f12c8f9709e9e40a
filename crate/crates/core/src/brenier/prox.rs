//! Proximal map of `λφ` for a max of affine pieces.
//!
//! With `z = x − λ Y θ` the problem
//! `min_z ½‖z − x‖² + λ φ(z)` is dual to the simplex-constrained QP
//!
//! ```text
//! min_θ  ½ λ ‖Y θ‖² − ⟨u, θ⟩,   u_k = ⟨y_k, x⟩ + c_k,
//! ```
//!
//! whose gradient is `−A_k(z)`. A primal active-set method on the free
//! support of `θ` solves it exactly; affinely dependent supports are
//! resolved by moving along zero-curvature directions.

use super::BrenierPotential;
use crate::error::{Error, Result};
use crate::linalg::sym_eigen;
use crate::scalar::{dot, Real};

impl<T: Real> BrenierPotential<T> {
    /// The unique minimizer of `½‖z − x‖² + λ φ(z)`.
    pub fn prox(&self, lambda: T, x: &[T]) -> Result<Vec<T>> {
        if !(lambda > T::zero()) || !lambda.is_finite() {
            return Err(Error::Invalid(format!("prox parameter must be positive, got {lambda}")));
        }
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!("point of length {} in R^{}", x.len(), self.dim())));
        }
        let m = self.len();
        let d = self.dim();
        let u: Vec<T> = (0..m).map(|k| self.piece(k, x)).collect();
        let half = T::lit(0.5);
        let atom_sq: Vec<T> = (0..m).map(|k| dot(self.atom(k), self.atom(k))).collect();
        let start = (0..m)
            .min_by(|&a, &b| {
                let qa = half * lambda * atom_sq[a] - u[a];
                let qb = half * lambda * atom_sq[b] - u[b];
                qa.partial_cmp(&qb).unwrap_or(std::cmp::Ordering::Equal)
            })
            .expect("nonempty");

        let xnorm = dot(x, x).sqrt();
        let scale = T::one()
            + self.lipschitz() * (xnorm + lambda * self.lipschitz())
            + self.intercepts().iter().fold(T::zero(), |s, v| s.max(v.abs()));
        let tol = T::lit(1e3) * T::epsilon() * scale;

        let mut free = vec![start];
        let mut theta = vec![T::one()];
        let max_iter = 50 * (m + d) + 100;

        let point = |free: &[usize], theta: &[T]| -> Vec<T> {
            let mut z = x.to_vec();
            for (&k, &t) in free.iter().zip(theta) {
                for (zi, &yi) in z.iter_mut().zip(self.atom(k)) {
                    *zi -= lambda * t * yi;
                }
            }
            z
        };

        for _ in 0..max_iter {
            let z = point(&free, &theta);
            let nf = free.len();
            if nf > 1 {
                // reduced coordinates p = Σ_r w_r (e_{F[r+1]} − e_{F[0]})
                let base = free[0];
                let diffs: Vec<Vec<T>> = free[1..]
                    .iter()
                    .map(|&k| self.atom(k).iter().zip(self.atom(base)).map(|(&a, &b)| a - b).collect())
                    .collect();
                let r = nf - 1;
                let mut h = vec![T::zero(); r * r];
                for a in 0..r {
                    for b in 0..r {
                        h[a * r + b] = lambda * dot(&diffs[a], &diffs[b]);
                    }
                }
                // gradient entries are −A_k(z)
                let g0 = -self.piece(base, &z);
                let rg: Vec<T> = free[1..].iter().map(|&k| -self.piece(k, &z) - g0).collect();
                let rmax = rg.iter().fold(T::zero(), |s, v| s.max(v.abs()));
                if rmax > tol {
                    let (eig, vecs) = sym_eigen(r, &h);
                    let top = eig.iter().fold(T::zero(), |s, v| s.max(v.abs()));
                    let zero_eig = T::lit(1e-10) * (top + lambda * T::epsilon());
                    let mut null_part = vec![T::zero(); r];
                    let mut newton = vec![T::zero(); r];
                    for (i, &ev) in eig.iter().enumerate() {
                        let col: Vec<T> = (0..r).map(|a| vecs[a * r + i]).collect();
                        let proj = dot(&col, &rg);
                        for a in 0..r {
                            if ev.abs() <= zero_eig {
                                null_part[a] += proj * col[a];
                            } else {
                                newton[a] -= proj / ev * col[a];
                            }
                        }
                    }
                    // descent along a direction of zero curvature must run into a bound
                    let null_norm = null_part.iter().fold(T::zero(), |s, v| s.max(v.abs()));
                    let (w, capped) = if null_norm > tol {
                        (null_part.iter().map(|&v| -v).collect::<Vec<T>>(), false)
                    } else {
                        (newton, true)
                    };
                    let mut p = vec![T::zero(); nf];
                    p[1..=r].copy_from_slice(&w[..r]);
                    for &wa in &w[..r] {
                        p[0] -= wa;
                    }
                    let mut step = if capped { T::one() } else { T::infinity() };
                    let mut block = None;
                    for (k, (&t, &pk)) in theta.iter().zip(&p).enumerate() {
                        if pk < T::zero() {
                            let s = t / -pk;
                            if s < step || (s == step && block.is_none()) {
                                step = s;
                                block = Some(k);
                            }
                        }
                    }
                    if !step.is_finite() {
                        return Err(Error::Numerical {
                            message: "prox active-set step unbounded".into(),
                            residual: null_norm.as_f64(),
                        });
                    }
                    for (t, &pk) in theta.iter_mut().zip(&p) {
                        *t += step * pk;
                    }
                    if let Some(b) = block {
                        theta[b] = T::zero();
                    }
                    let mut k = 0;
                    while k < free.len() {
                        if theta[k] <= T::zero() && free.len() > 1 {
                            free.remove(k);
                            theta.remove(k);
                        } else {
                            k += 1;
                        }
                    }
                    let total: T = theta.iter().copied().sum();
                    theta.iter_mut().for_each(|t| *t /= total);
                    continue;
                }
            }
            // stationary on the free face: price the remaining pieces
            let level = free.iter().map(|&k| self.piece(k, &z)).fold(T::neg_infinity(), T::max);
            let mut enter = None;
            let mut worst = tol;
            for k in 0..m {
                if free.contains(&k) {
                    continue;
                }
                let excess = self.piece(k, &z) - level;
                if excess > worst {
                    worst = excess;
                    enter = Some(k);
                }
            }
            match enter {
                None => return Ok(z),
                Some(k) => {
                    free.push(k);
                    theta.push(T::zero());
                }
            }
        }
        Err(Error::Numerical {
            message: format!("prox active-set method exceeded {max_iter} iterations"),
            residual: f64::NAN,
        })
    }

    /// Residual of the optimality condition `(x − z)/λ ∈ ∂φ(z)`.
    pub fn prox_certificate(&self, lambda: T, x: &[T], z: &[T]) -> T {
        let v: Vec<T> = x.iter().zip(z).map(|(&a, &b)| (a - b) / lambda).collect();
        self.subdifferential_residual(z, &v)
    }
}
