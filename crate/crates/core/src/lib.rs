//! Distributed LQR control and distributed minimum-energy observers for
//! networks of identical LTI agents.
//!
//! The crate covers the whole synthesis chain:
//!
//! * [`graphs`]: undirected interconnection topologies and Laplacian spectra.
//! * [`matops`]: Kronecker products, Riccati/Lyapunov solvers, stability tests.
//! * [`dlqr`]: centralized, top-down and bottom-up distributed LQR gains.
//! * [`mee_node`]: single-agent minimum-energy estimation and the node-level
//!   coordinate changes that prepare the distributed problem.
//! * [`dist_observer`]: spectral decoupling, the trace-minimisation LMI problem
//!   for the coupling gain `Φ`, cost bounds and design certificates.
//! * [`netsim`]: fixed-step simulation of agents plus distributed observer.
//! * [`app`]: JSON configs/reports, CSV traces and the command implementations
//!   used by the `distlqr` binary.
//!
//! Runnable walkthroughs live in the crate's `examples/` directory.

// `!(x > 0.0)` style checks are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

// Links the system OpenBLAS/LAPACK used by the ordered Schur routine.
extern crate openblas_src;

pub mod app;
pub mod dist_observer;
pub mod dlqr;
pub mod error;
pub mod graphs;
pub mod matops;
pub mod mee_node;
pub mod netsim;
pub mod tol;

pub use error::{Error, Result};
pub use graphs::GraphTopology;
pub use matops::AgentModel;
pub use tol::Tolerances;

/// Dense real matrix used throughout the crate.
pub type Mat = nalgebra::DMatrix<f64>;
/// Dense real column vector.
pub type Vector = nalgebra::DVector<f64>;
