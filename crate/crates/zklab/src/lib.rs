//! Numerical laboratory for the two-dimensional (generalized)
//! Zakharov-Kuznetsov equation
//!
//! ```text
//! ∂t u + ∂x Δu + u^k ∂x u = 0
//! ```
//!
//! and its symmetrized form `∂t v + ∂x³v + ∂y³v + c v^k (∂x v + ∂y v) = 0`.
//! The crate builds dispersive blow-up data, evolves it with the exact linear
//! group and an exponential integrator, and measures local regularity.

pub mod config;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod estimates;
pub mod evolve;
pub mod experiments;
pub mod grid;
pub mod propagator;
pub mod report;
pub mod snapshot;

pub use error::{Result, ZkError};
pub use grid::{Axis, Dir, Grid2D, RealField, SpectralField};
