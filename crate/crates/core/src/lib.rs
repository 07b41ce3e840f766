//! Semiclassical dynamics of the dissipative two-photon Dicke model.
//!
//! The crate integrates the six mean-field equations of motion, finds and
//! classifies their fixed points, estimates the largest Lyapunov exponent,
//! computes power spectra and amplitude statistics, and combines these into a
//! regime classifier that drives bifurcation and phase-diagram sweeps.

pub mod classify;
pub mod config;
pub mod error;
pub mod integrator;
pub mod io;
pub mod lyapunov;
pub mod model;
pub mod signal;
pub mod stability;

pub use error::{DickeError, Result};
pub use integrator::{integrate, IntegrationConfig, InitialCondition, Observable, Trajectory};
pub use model::{ModelParams, RawParams, State};
