//! Distributed stochastic gradient descent with a growing consensus penalty.
//!
//! The crate covers the discrete recursion (stacked and agentwise), the
//! continuous-time gradient flow it discretizes, and the machinery used to
//! show that noisy iterates are pushed away from the stable manifold of a
//! saddle point: the perturbed saddle path, the time-varying spectral split,
//! a Picard solver for the manifold's graph, the rectifying coordinate change
//! and the distance functional built on it.
//!
//! Everything is dense and meant for small problems. See the `examples/`
//! directory for one runnable program per capability.

pub mod cli;
pub mod engine;
pub mod error;
pub mod experiments;
pub mod flow;
pub mod graph;
pub mod linalg;
pub mod loss;
pub mod manifold;
pub mod schedule;

pub use error::{Error, Result};

/// Dense column vector used for all states.
pub type Vector = nalgebra::DVector<f64>;
/// Dense matrix used for all operators.
pub type Matrix = nalgebra::DMatrix<f64>;
