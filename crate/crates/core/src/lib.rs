//! Simulation and control core for the greenhouse mobile-robot benchmark.
//!
//! The crate is organised along the control hierarchy:
//!
//! - [`world`]: greenhouse layout, terrain sectors, slope field, obstacles and
//!   occupancy-grid rasterisation.
//! - [`physics`]: wheel/ground friction plant, differential-drive kinematics
//!   and encoder noise.
//! - [`ctl_low`]: per-motor PI(D) velocity loop with reference filter,
//!   back-calculation anti-windup and slope feedforward.
//! - [`ctl_mid`]: timed-elastic-band MPC trajectory tracker.
//! - [`planner`]: Lazy Theta* any-angle global planner.
//! - [`metrics`]: SAE/SCI indices and composite costs.

// `!(x > 0.0)` deliberately rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ctl_low;
pub mod ctl_mid;
pub mod geometry;
pub mod metrics;
pub mod noise;
pub mod physics;
pub mod planner;
pub mod world;

pub use geometry::{normalize_angle, Pose, Vec2};

/// Gravitational acceleration used throughout the plant model (m/s²).
pub const GRAVITY: f64 = 9.81;
