//! Simulation and inversion toolkit for the stochastic heat and wave
//! equations driven by a separable source `g(x) f(t) dW(t)`.
//!
//! The forward side produces boundary-flux samples over many Brownian paths
//! with finite differences; the inverse side turns the second moment of the
//! time-integrated flux into a first-kind Volterra system for `f²` and solves
//! it with a regularized block Kaczmarz iteration.
//!
//! Module map:
//!
//! * [`spectral`]: Dirichlet eigensystem, flux coefficients, recovery kernel.
//! * [`rng`]: reproducible per-path random streams.
//! * [`forward`]: finite-difference solvers and flux ensembles.
//! * [`oracle`]: spectral (mild-solution) simulator and exact variance.
//! * [`synthesis`]: variance series from an ensemble.
//! * [`inversion`]: Volterra system assembly and Kaczmarz iteration.
//! * [`experiment`]: configuration, end-to-end runs and verification suites.

pub mod error;
pub mod experiment;
pub mod forward;
pub mod grid;
pub mod inversion;
pub mod oracle;
pub mod profile;
pub mod quadrature;
pub mod rng;
pub mod spectral;
pub mod synthesis;

pub use error::{Error, Result};
pub use forward::{FieldState, FluxEnsemble};
pub use grid::GridSpec;
pub use inversion::{KaczmarzConfig, Reconstruction, VolterraSystem};
pub use profile::{SpatialProfile, TemporalProfile};
pub use rng::{IncrementSeries, SeedSpec, StreamTag};
pub use spectral::{
    BoundaryPoint, EigenMode, Equation, KernelTable, ModeIndex, Side, SpatialDomain,
};
pub use synthesis::VarianceSeries;
