//! Structure-preserving tangential interpolatory model reduction for linear
//! quantum stochastic systems.
//!
//! Systems are given in quadrature form `(A, B, C, D)` with real matrices or,
//! for completely passive systems, in annihilation-operator form
//! `(F, G, H, K)` with complex matrices. Reductions are Petrov–Galerkin
//! projections chosen so the reduced model is again physically realizable.

pub mod analysis;
pub mod error;
pub mod fixtures;
pub mod io;
pub mod linalg;
pub mod model;
pub mod reduction;
pub mod reproduce;
pub mod selection;
pub mod symplectic;

pub use error::{Error, Result};
pub use linalg::{Matrix, RealMatrix, SubspaceBasis, Vector};
pub use model::{AnnihilationSystem, LinearSystem, PrReport, QuadratureSystem, StateSpace, System};

pub use reduction::{Diagnostics, InterpolationData, Method, ReducedModel, ReductionResult, Side};
