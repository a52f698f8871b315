//! Pseudo-spectral Monte Carlo laboratory for the space-periodic stochastic
//! Burgers equation `u_t + u u_x - ν u_xx = ∂_t ξ` on the circle.
//!
//! The numerical core is generic over [`Scalar`] (`f32`/`f64`); the aliases at
//! the bottom of this file fix the common double precision instantiations.

pub mod dump;
pub mod ensemble;
pub mod error;
pub mod forcing;
pub mod inviscid;
pub mod mixing;
pub mod scalar;
pub mod solver;
pub mod spectral;
pub mod stats;

pub use error::{Error, Result};
pub use forcing::{ForcingSpec, NoiseCursor, NoisePath};
pub use scalar::Scalar;
pub use solver::{DtPolicy, NoiseMode, Solver, SolverConfig, Trajectory};
pub use stats::{BracketWindow, EnsembleAccumulator, Estimate, Observables, PowerLawFit, Probe};
pub use spectral::{Dealias, GridEvaluator, NonlinearWorkspace, PhysicalField, SpectralField};

pub type Field = spectral::SpectralField<f64>;
pub type Field32 = spectral::SpectralField<f32>;
pub type Samples = spectral::PhysicalField<f64>;
pub type Config = solver::SolverConfig<f64>;
pub type Trajectory64 = solver::Trajectory<f64>;
