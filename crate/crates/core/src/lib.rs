//! Simulation and statistics of collective quantum jumps in driven-dissipative
//! bistable Rydberg gases.
//!
//! Two mean-field models produce trajectories of the Rydberg population:
//!
//! * [`three_level`]: a Lindblad master equation for `|g⟩, |r⟩, |s⟩` with a
//!   dual-tone microwave coupling and white detuning noise;
//! * [`two_level`]: an adiabatically reduced density equation with an
//!   Ornstein-Uhlenbeck detuning and periodic modulation.
//!
//! [`jumps`] extracts phase-switching events and interval histograms from
//! trajectories (simulated or measured), and [`fitting`] fits the interval
//! distribution models. All quantities are in units of the decay rate γ.

// `!(x > 0.0)` rejects NaN along with non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod fitting;
pub mod io;
pub mod jumps;
pub mod noise;
pub mod ode;
pub mod optimize;
pub mod rng;
pub mod three_level;
pub mod trajectory;
pub mod two_level;

pub use error::{Error, ErrorCategory, Result};
pub use fitting::{FitModel, FitResult, ModelKind};
pub use jumps::{IntervalHistogram, JumpConfig, JumpEvents, TimeSeries};
pub use noise::{NoiseMode, NoiseSignal, OuParams};
pub use three_level::{DensityMatrix3, ThreeLevelParams};
pub use trajectory::Trajectory;
pub use two_level::{FixedPointSet, TwoLevelParams, TwoLevelState};

/// Version string embedded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
