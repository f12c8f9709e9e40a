use std::collections::HashMap;
use std::f64::consts::{E, PI};

use serde::Serialize;

use crate::brenier::BrenierPotential;
use crate::error::{Error, Result};
use crate::measures::Measure;
use crate::scalar::{dot, Real};

/// A convex potential that can be evaluated together with a gradient
/// selection and its Legendre conjugate.
pub trait ConvexPotential {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
    fn conjugate(&self, y: &[f64]) -> f64;
}

impl ConvexPotential for BrenierPotential<f64> {
    fn dim(&self) -> usize {
        BrenierPotential::dim(self)
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.eval(x)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.monge_map(x)
    }

    fn conjugate(&self, y: &[f64]) -> f64 {
        BrenierPotential::conjugate(self, y)
    }
}

/// Upper bound on the volume of the ball of radius `r` in `R^d`:
/// `e / (√(2π) √(d/2 + 1)) · (πe / (d/2 + 1))^{d/2} · r^d`.
pub fn ball_volume_bound(d: usize, r: f64) -> f64 {
    let h = d as f64 / 2.0 + 1.0;
    E / ((2.0 * PI).sqrt() * h.sqrt()) * (PI * E / h).powf(d as f64 / 2.0) * r.powi(d as i32)
}

/// Explicit constants of the gradient stability bound.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundConstants {
    /// Support radius.
    pub r: f64,
    /// Density bound of the source.
    pub m: f64,
    /// Lipschitz constant of both potentials.
    pub l: f64,
    pub q: f64,
    pub d: usize,
    /// `4 e/(√(2π)√(d/2+1)) (64πe/(d/2+1))^{d/2} 48d² (2R)^{d−1}`.
    pub c_rd: f64,
    /// `max(268√R, 4 (8R³ M C_Rd)^{1/4})`.
    pub c_l1: f64,
}

impl BoundConstants {
    pub fn new(r: f64, m: f64, d: usize, q: f64, l: f64) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::Invalid(format!("radius must be positive, got {r}")));
        }
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::Invalid(format!("density bound must be positive, got {m}")));
        }
        if d == 0 {
            return Err(Error::Invalid("dimension must be at least 1".into()));
        }
        if !(1.0..=2.0).contains(&q) {
            return Err(Error::Invalid(format!("exponent q must lie in [1, 2], got {q}")));
        }
        if !(l >= 0.0 && l.is_finite()) {
            return Err(Error::Invalid(format!("Lipschitz constant must be nonnegative, got {l}")));
        }
        let h = d as f64 / 2.0 + 1.0;
        let df = d as f64;
        let c_rd = 4.0 * E / ((2.0 * PI).sqrt() * h.sqrt())
            * (PI * E * 64.0 / h).powf(df / 2.0)
            * 48.0
            * df
            * df
            * (2.0 * r).powi(d as i32 - 1);
        let c_l1 = (268.0 * r.sqrt()).max(4.0 * (8.0 * r.powi(3) * m * c_rd).powf(0.25));
        Ok(Self { r, m, l, q, d, c_rd, c_l1 })
    }

    /// Gap level separating the two regimes of the bound.
    pub fn threshold(&self) -> f64 {
        let q = self.q;
        (self.r / 8.0).powf((q + 3.0) / (q + 1.0)) * 2.0 * self.l * (self.m * self.c_rd).powf(2.0 / (q + 1.0))
    }

    /// Regime (1 or 2) and bound on `‖∇φ̄ − ∇φ‖_{L^q(μ)}` for a gap `delta`.
    pub fn gradient_bound(&self, delta: f64) -> (u8, f64) {
        let (q, l, r) = (self.q, self.l, self.r);
        let delta = delta.max(0.0);
        if delta > self.threshold() {
            let first = 4.0 * (l / r).sqrt() * delta.sqrt();
            let second = if l > 0.0 {
                l * (32.0 * delta / (r * l)).powf((q + 1.0) / (2.0 * q))
            } else {
                0.0
            };
            (1, first + second)
        } else {
            (2, 4.0 * (l.powf(q + 2.0) * self.m * self.c_rd * delta).powf(1.0 / (q + 3.0)))
        }
    }
}

/// Both sides of Carlier's remainder for the Fenchel–Young inequality,
/// `φ(x) + φ*(p) − ⟨x, p⟩ ≥ ‖x − prox_{λφ}(x + λp)‖² / λ`.
/// The left side is `+∞` when `p` lies outside the hull of the atoms.
pub fn carlier_remainder<T: Real>(phi: &BrenierPotential<T>, x: &[T], p: &[T], lambda: T) -> Result<(T, T)> {
    if x.len() != phi.dim() || p.len() != phi.dim() {
        return Err(Error::DimensionMismatch("point and potential dimensions differ".into()));
    }
    let conj = phi.conjugate(p);
    let lhs = if conj.is_finite() {
        phi.eval(x) + conj - dot(x, p)
    } else {
        T::infinity()
    };
    let shifted: Vec<T> = x.iter().zip(p).map(|(&a, &b)| a + lambda * b).collect();
    let z = phi.prox(lambda, &shifted)?;
    let rhs = crate::scalar::dist_sq(x, &z) / lambda;
    Ok((lhs, rhs))
}

/// Conjugate evaluations keyed by the exact bits of the argument.
struct ConjugateCache<'a, P: ?Sized> {
    phi: &'a P,
    memo: HashMap<Vec<u64>, f64>,
}

impl<'a, P: ConvexPotential + ?Sized> ConjugateCache<'a, P> {
    fn new(phi: &'a P) -> Self {
        Self {
            phi,
            memo: HashMap::new(),
        }
    }

    fn get(&mut self, y: &[f64]) -> f64 {
        let key: Vec<u64> = y.iter().map(|v| v.to_bits()).collect();
        *self.memo.entry(key).or_insert_with(|| self.phi.conjugate(y))
    }
}

fn weighted_mean_and_error(values: &[f64], weights: &[f64]) -> (f64, f64) {
    let mean: f64 = values.iter().zip(weights).map(|(v, w)| v * w).sum();
    let var: f64 = values.iter().zip(weights).map(|(v, w)| w * (v - mean).powi(2)).sum();
    let eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
    (mean, (var / eff).sqrt())
}

/// `∫ φ(x) + φ*(∇φ̄(x)) − ⟨x, ∇φ̄(x)⟩ dμ(x)` over the sample measure, with
/// its standard error. Every integrand value is nonnegative.
pub fn fenchel_young_gap(
    phi: &(impl ConvexPotential + ?Sized),
    reference: &(impl ConvexPotential + ?Sized),
    mu_samples: &Measure<f64>,
) -> (f64, f64) {
    let mut cache = ConjugateCache::new(phi);
    let values: Vec<f64> = mu_samples
        .points()
        .map(|x| {
            let t = reference.gradient(x);
            (phi.value(x) + cache.get(&t) - dot(x, &t)).max(0.0)
        })
        .collect();
    weighted_mean_and_error(&values, mu_samples.weights())
}

/// `∫φ dμ + ∫φ* dν − (∫φ̄ dμ + ∫φ̄* dν)` with `μ` given by samples or
/// quadrature nodes and `ν` discrete.
pub fn dual_gap(
    phi: &(impl ConvexPotential + ?Sized),
    reference: &(impl ConvexPotential + ?Sized),
    mu_samples: &Measure<f64>,
    nu: &Measure<f64>,
) -> f64 {
    let source = mu_samples.integrate(|x| phi.value(x) - reference.value(x));
    let target = nu.integrate(|y| {
        let a = phi.conjugate(y);
        let b = reference.conjugate(y);
        if a.is_infinite() || b.is_infinite() {
            if a == b {
                0.0
            } else {
                a - b
            }
        } else {
            a - b
        }
    });
    source + target
}

/// Outcome of comparing the gradient distance with the stability bounds.
#[derive(Clone, Debug, Serialize)]
pub struct BoundReport {
    pub q: f64,
    /// `‖∇φ̄ − ∇φ‖_{L^q(μ)}`.
    pub lhs: f64,
    /// `‖∇φ̄ − ∇φ‖_{L¹(μ)}` and its Monte Carlo standard error.
    pub l1_distance: f64,
    pub l1_std_error: f64,
    /// Integrated Fenchel–Young gap and its standard error.
    pub delta: f64,
    pub delta_std_error: f64,
    pub case: u8,
    pub threshold: f64,
    pub rhs: f64,
    pub holds: bool,
    pub l1_constant: f64,
    /// `(L¹ distance)⁴ / C⁴`, to be compared with `delta`.
    pub l1_ratio: f64,
    pub l1_holds: bool,
}

/// Measures `‖∇φ̄ − ∇φ‖` on the samples (gradients are the averaging
/// selections) and checks it against the two-regime bound and against the
/// simplified fourth-root bound.
pub fn error_bound_check(
    phi: &(impl ConvexPotential + ?Sized),
    reference: &(impl ConvexPotential + ?Sized),
    mu_samples: &Measure<f64>,
    consts: &BoundConstants,
) -> BoundReport {
    let q = consts.q;
    let dists: Vec<f64> = mu_samples
        .points()
        .map(|x| crate::scalar::dist_sq(&reference.gradient(x), &phi.gradient(x)).sqrt())
        .collect();
    let w = mu_samples.weights();
    let (l1, l1_err) = weighted_mean_and_error(&dists, w);
    let lq = dists.iter().zip(w).map(|(v, w)| w * v.powf(q)).sum::<f64>().powf(1.0 / q);
    let (delta, delta_err) = fenchel_young_gap(phi, reference, mu_samples);
    let (case, rhs) = consts.gradient_bound(delta);
    let l1_ratio = (l1 / consts.c_l1).powi(4);
    BoundReport {
        q,
        lhs: lq,
        l1_distance: l1,
        l1_std_error: l1_err,
        delta,
        delta_std_error: delta_err,
        case,
        threshold: consts.threshold(),
        rhs,
        holds: lq <= rhs + 1e-6 * (1.0 + rhs),
        l1_constant: consts.c_l1,
        l1_ratio,
        l1_holds: l1_ratio <= delta + 1e-6,
    }
}
