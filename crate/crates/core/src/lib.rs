//! Adaptive neural-network basis collocation for linear and semilinear PDEs.
//!
//! A solution is built stage by stage: each stage samples collocation points
//! where the current residual is large, initializes a single-hidden-layer
//! network whose partition hyperplanes pass through residual-sampled base
//! points, trains it on the residual equation, and appends it to the basis of
//! an outer least-squares collocation solve.

pub mod activation;
pub mod basis;
pub mod checks;
pub mod error;
pub mod geometry;
pub mod jet;
pub mod linalg;
pub mod operators;
pub mod problems;
pub mod rng;
pub mod solver;
pub mod training;

pub use error::{Error, Result};
