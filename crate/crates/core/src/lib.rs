//! Simulation and analysis toolkit for a passive, cable-based torso
//! stabiliser.
//!
//! The crate is organised along the data flow:
//!
//! - [`motion`]: body-anchor trajectories (ingested or synthesized) and the
//!   straight-line cable geometry that turns them into cable length.
//! - [`signal`]: Savitzky-Golay smoothing, differentiation and velocity /
//!   fall-signature event detection.
//! - [`device`]: the capstan, coil spring, centrifugal-magnetic lock and
//!   nonlinear blocking spring as a deterministic fixed-step state machine.
//! - [`tuning`]: closed-form inversion of the lock threshold plus scenario
//!   suites and parameter sweeps.

pub mod device;
pub mod geometry;
pub mod motion;
pub mod signal;
pub mod tuning;

pub use device::{DeviceParams, DeviceState, Mode, ModeChange, Simulation};
pub use geometry::Vec3;
pub use motion::{AnchorConfig, CableSeries, FallProfile, LeanProfile, Trajectory};
pub use signal::{DetectionEvent, DetectorMode, DetectorSpec, SgSpec};
pub use tuning::{Scenario, SuiteReport, TuneTarget};
