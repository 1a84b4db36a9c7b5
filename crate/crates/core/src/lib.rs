//! Asynchronous stochastic successive convex approximation.
//!
//! The crate is organised bottom-up:
//!
//! * [`problem`] defines stochastic problems, surrogates, constraint sets and regularizers.
//! * [`ellipsoid`] holds the exact ellipsoid projection and the quadratic-over-ellipsoid solver.
//! * [`sca`] implements the combined surrogate, the subproblem solver and the update rules.
//! * [`harness`] simulates the master/worker timeline in discrete time slots.
//! * [`synthetic`] is a strongly convex quadratic benchmark with known optimum.
//! * [`wsn`] is the wireless sensor network precoding application.
//! * [`experiment`] drives Monte-Carlo runs, sweeps and property checks.

pub mod ellipsoid;
pub mod error;
pub mod experiment;
pub mod harness;
pub mod problem;
pub mod rng;
pub mod sca;
pub mod synthetic;
pub mod wsn;

pub use error::{Error, Result};
