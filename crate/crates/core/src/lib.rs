//! Quantum-jump simulation of time-local (TCL) non-Markovian master
//! equations.
//!
//! A master equation whose rates may turn negative is embedded into a
//! Lindblad equation on `ℋ ⊗ ℂ³`; the reduced state is recovered as
//! `ρ = W₁₂ / tr W₁₂`. The crate provides
//!
//! * [`linalg`]: dense complex matrices, Hermitian eigensolver, adaptive
//!   Dormand–Prince integration,
//! * [`model`]: master-equation specifications, including the damped
//!   Jaynes–Cummings model,
//! * [`embedding`]: the lifted jump operators,
//! * [`solver`]: deterministic reference solutions on `ℋ` and `ℋ ⊗ ℂ³`,
//! * [`trajectory`]: the jump process and the ensemble ratio estimator,
//! * [`cli`]: the `nmqj` command-line driver.
//!
//! Numerical code is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix double precision.

pub mod cli;
pub mod embedding;
pub mod error;
pub mod linalg;
pub mod model;
pub mod scalar;
pub mod solver;
pub mod stats;
pub mod trajectory;

pub use error::{Error, Result};
pub use scalar::Real;

pub type C64 = num_complex::Complex<f64>;
pub type CMatrix64 = linalg::CMatrix<f64>;
pub type TclSpec64 = model::TclSpec<f64>;
pub type JcParams64 = model::JcParams<f64>;
pub type EmbeddedGenerator64 = embedding::EmbeddedGenerator<f64>;
pub type BlockDensity64 = solver::BlockDensity<f64>;
pub type TrajectoryState64 = trajectory::TrajectoryState<f64>;
pub type EnsembleAccumulator64 = trajectory::EnsembleAccumulator<f64>;
