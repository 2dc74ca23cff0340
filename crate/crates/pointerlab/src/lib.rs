//! Pointer-basis analysis and feedback stabilization of linear Gaussian
//! (LG) open quantum systems.
//!
//! The crate covers the full pipeline:
//!
//! 1. [`lgmodel`] builds moment dynamics `(A, D)` from Hamiltonian/Lindblad
//!    data and provides Gaussian-state primitives (purity, fidelity,
//!    uncertainty checks).
//! 2. [`ensembles`] classifies conditioned covariances as physically
//!    realizable, computes mixing and survival times, and locates the
//!    pointer basis by constrained optimization.
//! 3. [`control`] designs proportional feedback on the conditional mean,
//!    evaluates stabilization fidelity and purity, and exhibits the
//!    cheap-control LQG equivalence.
//! 4. [`qbm`] instantiates everything for one-dimensional quantum Brownian
//!    motion in the high-temperature regime, with independent closed forms
//!    used as cross-checks, plus the temperature power-law fit.
//! 5. [`trajectories`] verifies the stationary ensemble statistics by
//!    reproducible Monte Carlo simulation of the conditional mean.
//!
//! [`matops`] holds the dense matrix kernels everything else builds on.

pub mod control;
pub mod ensembles;
pub mod error;
pub mod lgmodel;
pub mod matops;
pub mod qbm;
pub mod trajectories;

pub use error::{Error, Result};
pub use matops::SquareMatrix;
