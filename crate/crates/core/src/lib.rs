//! Simulation and real-time estimation for continuously measured atomic
//! spin-precession magnetometers.
//!
//! * [`sensor`]: conditional spin-moment dynamics and photocurrent.
//! * [`signals`]: Ornstein-Uhlenbeck and filtered Van der Pol field waveforms.
//! * [`ekf`]: extended Kalman filter with measurement-correlated process noise.
//! * [`control`]: feedback law cancelling the Larmor precession.
//! * [`bounds`]: decoherence-limited lower bounds on the tracking error.
//! * [`experiment`]: closed-loop trajectories, Monte Carlo ensembles, statistics.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod control;
pub mod ekf;
pub mod error;
pub mod experiment;
pub mod sensor;
pub mod signals;

pub use error::{Error, Result};
