//! Finitely supported probability measures, population laws to sample
//! from, and their on-disk formats.

mod io;
mod rng;
mod spec;

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::scalar::{norm_sq, Real};

pub use io::{read_measure, read_points, write_measure, write_points, Format, MeasureFile};
pub use rng::{derive_seed, stream, StreamRng};
pub use spec::{sample, BoxBounds, DistributionSpec, Marginal1d};
#[cfg(test)]
pub(crate) use spec::unit_ball_volume;

/// Smallest weight an atom may carry after normalization.
pub const MIN_WEIGHT: f64 = 1e-15;

/// Tolerance on `|Σ w − 1|` accepted before renormalizing.
pub const WEIGHT_SUM_TOL: f64 = 1e-9;

/// A probability measure `Σ w_i δ_{x_i}` on `R^d`.
///
/// Points are stored row-major in one flat buffer. Construction drops
/// zero-weight atoms, merges exactly equal atoms and renormalizes the
/// weights, so the sum is one up to rounding.
#[derive(Clone, Debug, PartialEq)]
pub struct Measure<T> {
    dim: usize,
    coords: Vec<T>,
    weights: Vec<T>,
}

impl<T: Real> Measure<T> {
    pub fn new(dim: usize, points: Vec<Vec<T>>, weights: Vec<T>) -> Result<Self> {
        if let Some((i, p)) = points.iter().enumerate().find(|(_, p)| p.len() != dim) {
            return Err(Error::DimensionMismatch(format!(
                "atom {i} has {} coordinates, expected {dim}",
                p.len()
            )));
        }
        let coords = points.into_iter().flatten().collect();
        Self::from_flat(dim, coords, weights)
    }

    /// Builds a measure from a row-major coordinate buffer.
    pub fn from_flat(dim: usize, coords: Vec<T>, weights: Vec<T>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Invalid("dimension must be positive".into()));
        }
        if coords.len() != dim * weights.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} coordinates for {} atoms of dimension {dim}",
                coords.len(),
                weights.len()
            )));
        }
        if let Some(c) = coords.iter().find(|c| !c.is_finite()) {
            return Err(Error::Invalid(format!("non-finite coordinate {c}")));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < T::zero()) {
            return Err(Error::Invalid(format!("invalid weight {w}")));
        }

        let sum: T = weights.iter().copied().sum();
        let tol = WEIGHT_SUM_TOL.max(4.0 * weights.len() as f64 * T::epsilon().as_f64());
        if (sum.as_f64() - 1.0).abs() > tol {
            return Err(Error::WeightSum { sum: sum.as_f64() });
        }

        let mut merged_coords: Vec<T> = Vec::with_capacity(coords.len());
        let mut merged_weights: Vec<T> = Vec::with_capacity(weights.len());
        let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
        for (i, &w) in weights.iter().enumerate() {
            if w == T::zero() {
                continue;
            }
            let p = &coords[i * dim..(i + 1) * dim];
            // +0.0 folds -0.0 into the same key
            let key: Vec<u64> = p.iter().map(|c| (c.as_f64() + 0.0).to_bits()).collect();
            match seen.get(&key) {
                Some(&k) => merged_weights[k] += w,
                None => {
                    seen.insert(key, merged_weights.len());
                    merged_coords.extend_from_slice(p);
                    merged_weights.push(w);
                }
            }
        }
        if merged_weights.is_empty() {
            return Err(Error::Invalid("measure has no atom with positive weight".into()));
        }
        for w in merged_weights.iter_mut() {
            *w /= sum;
            if w.as_f64() < MIN_WEIGHT {
                return Err(Error::Invalid(format!("atom weight {w} below {MIN_WEIGHT:e}")));
            }
        }
        Ok(Self {
            dim,
            coords: merged_coords,
            weights: merged_weights,
        })
    }

    /// Uniform weights `1/n` on the given atoms.
    pub fn uniform(dim: usize, points: Vec<Vec<T>>) -> Result<Self> {
        let n = points.len();
        if n == 0 {
            return Err(Error::Invalid("measure has no atom with positive weight".into()));
        }
        let w = T::one() / T::of_usize(n);
        Self::new(dim, points, vec![w; n])
    }

    pub fn dirac(point: Vec<T>) -> Result<Self> {
        let dim = point.len();
        Self::new(dim, vec![point], vec![T::one()])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[T] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[T]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn coords(&self) -> &[T] {
        &self.coords
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn weight(&self, i: usize) -> T {
        self.weights[i]
    }

    /// Largest Euclidean norm of an atom.
    pub fn support_radius(&self) -> T {
        self.points()
            .map(norm_sq)
            .fold(T::zero(), T::max)
            .sqrt()
    }

    pub fn mean(&self) -> Vec<T> {
        let mut m = vec![T::zero(); self.dim];
        for (p, &w) in self.points().zip(&self.weights) {
            for (acc, &c) in m.iter_mut().zip(p) {
                *acc += w * c;
            }
        }
        m
    }

    /// `Σ w_i f(x_i)`.
    pub fn integrate(&self, mut f: impl FnMut(&[T]) -> T) -> T {
        self.points()
            .zip(&self.weights)
            .fold(T::zero(), |acc, (p, &w)| acc + w * f(p))
    }

    /// Second moment `Σ w_i ½‖x_i‖²`.
    pub fn half_second_moment(&self) -> T {
        let half = T::lit(0.5);
        self.integrate(|p| half * norm_sq(p))
    }

    pub fn to_f64(&self) -> Measure<f64> {
        Measure {
            dim: self.dim,
            coords: self.coords.iter().map(|c| c.as_f64()).collect(),
            weights: self.weights.iter().map(|w| w.as_f64()).collect(),
        }
    }

    pub fn cast<U: Real>(&self) -> Measure<U> {
        Measure {
            dim: self.dim,
            coords: self.coords.iter().map(|c| U::lit(c.as_f64())).collect(),
            weights: self.weights.iter().map(|w| U::lit(w.as_f64())).collect(),
        }
    }
}

/// Largest atom norm; free-function form of [`Measure::support_radius`].
pub fn support_radius<T: Real>(m: &Measure<T>) -> T {
    m.support_radius()
}
