//! Exact quadratic optimal transport between finitely supported measures,
//! the piecewise-affine Brenier potential built from the optimal duals,
//! and tools to measure how well the induced map estimates a population
//! transport map.
//!
//! The numerical core is generic over [`scalar::Real`] (`f32` or `f64`);
//! the bound checks and experiments work in `f64`.
//!
//! ```
//! use brenier_ot::{ot_lp, BrenierPotential, PointCloudMeasure};
//!
//! let mu = PointCloudMeasure::uniform(1, vec![vec![0.0], vec![2.0]]).unwrap();
//! let nu = PointCloudMeasure::uniform(1, vec![vec![1.0], vec![3.0]]).unwrap();
//! let sol = ot_lp::solve(&mu, &nu).unwrap();
//! assert!((sol.primal_value - 0.5).abs() < 1e-12);
//! let phi = BrenierPotential::from_solution(&nu, &sol).unwrap();
//! assert_eq!(phi.monge_map(&[-1.0]), vec![1.0]);
//! ```

pub mod brenier;
pub mod error;
pub mod experiments;
mod linalg;
pub mod lp;
pub mod measures;
pub mod metrics;
pub mod ot_lp;
pub mod scalar;
pub mod semidiscrete;

pub use error::{Error, Result};

/// Version of this library, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type PointCloudMeasure = measures::Measure<f64>;
pub type PointCloudMeasureF32 = measures::Measure<f32>;
pub type TransportPlan = ot_lp::TransportPlan<f64>;
pub type DualPair = ot_lp::DualPair<f64>;
pub type OtSolution = ot_lp::OtSolution<f64>;
pub type CostMatrix = ot_lp::CostMatrix<f64>;
pub type BrenierPotential = brenier::BrenierPotential<f64>;
pub type BrenierPotentialF32 = brenier::BrenierPotential<f32>;
pub type SemiDual = semidiscrete::SemiDual<f64>;
