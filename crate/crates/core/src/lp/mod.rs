//! Linear programming kernels: a dense tableau simplex for the small LPs
//! attached to potentials, a network simplex for transportation problems,
//! and a max-flow routine used to certify semi-dual optimality.

mod dense;
mod maxflow;
mod network;

pub use dense::{DenseLp, LpFailure, LpSolution};
pub use maxflow::MaxFlow;
pub use network::{solve_transport, TransportBasis};
