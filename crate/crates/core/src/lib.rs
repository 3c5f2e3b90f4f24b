//! Dual-sparse regularized randomized reduction for linear classification.
//!
//! The crate reduces high-dimensional sparse examples with a seeded random
//! operator, solves an ℓ1-regularized dual problem in the reduced space, maps
//! the dual solution back to a weight vector in the original space, and
//! checks the resulting recovery error against its theoretical bounds.
//!
//! * [`dataset`]: sparse examples, svmlight I/O, synthetic generators
//! * [`sketch`]: Gaussian/Rademacher/discrete projections, hashing,
//!   randomized Hadamard and coordinate sampling
//! * [`dualsolve`]: stochastic dual coordinate ascent for hinge and squared
//!   hinge losses with a shifted margin, and primal recovery
//! * [`theory`]: perturbation vectors, cone and error-bound checks,
//!   restricted eigenvalues by enumeration
//! * [`distsim`]: in-process distributed dual coordinate ascent with warm
//!   starts

pub mod dataset;
pub mod distsim;
pub mod dualsolve;
pub mod error;
pub mod rng;
pub mod sketch;
pub mod theory;

pub use error::{Error, Result};
