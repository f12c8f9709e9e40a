//! Wasserstein distances between measures and between couplings, and
//! numerical checks of the quantitative stability bounds.

mod bounds;
mod covering;

pub use bounds::{
    ball_volume_bound, carlier_remainder, dual_gap, error_bound_check, fenchel_young_gap, BoundConstants,
    BoundReport, ConvexPotential,
};
pub use covering::{covering_check, CoveringReport};

use crate::error::{Error, Result};
use crate::measures::Measure;
use crate::ot_lp::{solve_with_cost, CostKind, CostMatrix, TransportPlan, ACTIVE_MASS};
use crate::scalar::Real;

/// Largest support-size product accepted by [`coupling_w2`].
pub const MAX_COUPLING_PRODUCT: usize = 10_000_000;

/// `W₁` (order 1) or `W₂` (order 2).
pub fn wasserstein<T: Real>(mu: &Measure<T>, nu: &Measure<T>, order: u32) -> Result<T> {
    let kind = match order {
        1 => CostKind::Euclidean,
        2 => CostKind::HalfSquaredEuclidean,
        _ => return Err(Error::Invalid(format!("Wasserstein order must be 1 or 2, got {order}"))),
    };
    let cost = CostMatrix::between(mu, nu, kind)?;
    let value = solve_with_cost(mu, nu, &cost)?.primal_value.max(T::zero());
    Ok(match order {
        1 => value,
        _ => (T::lit(2.0) * value).sqrt(),
    })
}

/// A transport plan seen as a discrete measure on `R^d × R^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingMeasure<T> {
    measure: Measure<T>,
}

impl<T: Real> CouplingMeasure<T> {
    /// Pairs `(x_i, y_j)` of the cells carrying more than the activity threshold.
    pub fn from_plan(mu: &Measure<T>, nu: &Measure<T>, plan: &TransportPlan<T>) -> Result<Self> {
        if mu.len() != plan.rows() || nu.len() != plan.cols() || mu.dim() != nu.dim() {
            return Err(Error::DimensionMismatch("plan does not match its marginals".into()));
        }
        let active = T::lit(ACTIVE_MASS);
        let mut coords = Vec::new();
        let mut masses = Vec::new();
        for &(i, j, x) in plan.cells() {
            if x > active {
                coords.extend_from_slice(mu.point(i));
                coords.extend_from_slice(nu.point(j));
                masses.push(x);
            }
        }
        Self::from_pairs(2 * mu.dim(), coords, masses)
    }

    /// Coupling given by concatenated pairs (flat, `2d` coordinates each).
    pub fn from_pairs(dim: usize, coords: Vec<T>, masses: Vec<T>) -> Result<Self> {
        if dim == 0 || !dim.is_multiple_of(2) {
            return Err(Error::DimensionMismatch(format!("coupling coordinates must be even, got {dim}")));
        }
        let total: T = masses.iter().copied().sum();
        if (total - T::one()).abs() > T::lit(1e-10).max(T::solver_eps()) * T::of_usize(masses.len().max(1)) {
            return Err(Error::WeightSum { sum: total.as_f64() });
        }
        Ok(Self {
            measure: Measure::from_flat(dim, coords, masses)?,
        })
    }

    /// The graph coupling `(id, T)_# μ`.
    pub fn graph(mu: &Measure<T>, map: impl Fn(&[T]) -> Vec<T>) -> Result<Self> {
        let mut coords = Vec::with_capacity(2 * mu.coords().len());
        for x in mu.points() {
            coords.extend_from_slice(x);
            coords.extend(map(x));
        }
        Self::from_pairs(2 * mu.dim(), coords, mu.weights().to_vec())
    }

    pub fn as_measure(&self) -> &Measure<T> {
        &self.measure
    }

    pub fn len(&self) -> usize {
        self.measure.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measure.is_empty()
    }
}

/// `W₂` between two couplings on `R^{2d}`.
pub fn coupling_w2<T: Real>(a: &CouplingMeasure<T>, b: &CouplingMeasure<T>) -> Result<T> {
    let product = a.len().saturating_mul(b.len());
    if product > MAX_COUPLING_PRODUCT {
        return Err(Error::TooLarge(format!(
            "coupling supports {}×{} exceed {MAX_COUPLING_PRODUCT}",
            a.len(),
            b.len()
        )));
    }
    wasserstein(a.as_measure(), b.as_measure(), 2)
}
