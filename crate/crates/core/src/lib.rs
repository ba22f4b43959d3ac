//! Single-ion transport magnetometry simulator.
//!
//! A single trapped ion is shuttled along the axis of a segmented Paul trap
//! inside a spin-echo sequence; the phase it picks up is proportional to
//! the magnetic-field gradient times the displacement-time integral of the
//! trajectory. This crate simulates that measurement end to end and runs
//! the estimation pipeline that recovers gradients, field differences and
//! long-run sensitivity from projection-noise-limited data:
//!
//! - [`trap`]: axial potential superposition, minimum tracking, transport
//!   trajectories and the displacement-time integral,
//! - [`spin`]: echo phase, fringe probabilities, counter-seeded projection
//!   noise ([`rng`]),
//! - [`estimation`]: fringe fits, the three-point phase estimator, shot
//!   noise propagation, gradient regression, running means and Allan
//!   deviations,
//! - [`calibration`]: coil-current models, zero-gradient solving, the
//!   closed calibration loop and coherence estimates,
//! - [`config`] / [`scenario`]: TOML-configured, seed-deterministic
//!   scenario runs producing CSV outputs,
//! - [`selftest`]: built-in oracle battery behind the `selftest` scenario.
//!
//! Everything is a pure function of (configuration, master seed): rerunning
//! a scenario byte-reproduces its outputs.

pub mod calibration;
pub mod config;
pub mod constants;
pub mod error;
pub mod estimation;
mod linalg;
pub mod rng;
pub mod scenario;
pub mod selftest;
pub mod shape;
pub mod spin;
pub mod spline;
pub mod trap;

pub use error::{Error, Result};
