//! Simulation and numerics for N-particle branching Brownian motion with
//! selection and its free-boundary hydrodynamic limit.
//!
//! * [`measures`]: empirical measures, tail functions, exact 1-D transport.
//! * [`waves`]: travelling waves `π_c`, in particular `π_min(x) = 2x e^{−√2x}`.
//! * [`nbbm`]: exact event-driven simulation of the particle system.
//! * [`stationary`]: long-run estimators (velocity, stationary profile).
//! * [`fbpde`]: finite-volume solver for the free-boundary equation.
//! * [`coupling`]: transport-optimal coupling of two particle systems.
//! * [`killedbm`]: Brownian motion killed at a moving boundary.

pub mod coupling;
pub mod error;
pub mod fbpde;
pub mod killedbm;
pub mod measures;
pub mod nbbm;
pub mod replicas;
pub mod rng;
pub mod stationary;
pub mod stats;
pub mod verify;
pub mod waves;

pub use error::{Error, Result};
