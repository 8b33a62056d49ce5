//! Minimum-time traversal of fixed geometric paths for quadrotors.
//!
//! Given a collision-free geometric path, this crate finds the fastest time
//! parameterization that the full rigid-body dynamics and per-motor thrust
//! bounds of the vehicle admit. The path itself is never modified; only its
//! timing is.
//!
//! The toolkit bundles:
//!
//! - [`quad`]: rigid-body dynamics, control allocation, and the differential
//!   flatness map used to evaluate and seed trajectories.
//! - [`path`]: minimum-acceleration/jerk/snap seed fitting through waypoints
//!   and geometric-path evaluation with analytic derivatives.
//! - [`reparam`]: square-speed-profile machinery (time quadrature, time maps,
//!   initial-guess construction).
//! - [`nlp`]: a generic smooth constrained-optimization engine with analytic
//!   sparse first derivatives.
//! - [`topp`]: the full rigid-body time-optimal path parameterization
//!   program, assembled over (h, h', q, omega, alpha, u) grids.
//! - [`baselines`]: convex speed-profile relaxations (velocity bound,
//!   velocity + total-thrust bound) and uniform time dilation.
//! - [`traj`]: uniformly time-sampled reference trajectories with quintic and
//!   quaternion-spline interpolation, plus CSV/JSON persistence.
//! - [`sim`]: closed-loop rollout of a tracking controller over the rigid
//!   body, for verifying planned trajectories.
//! - [`bench`]: the randomized benchmark harness behind the CLI.

pub mod baselines;
pub mod bench;
pub mod config;
pub mod nlp;
pub mod path;
pub mod quad;
pub mod reparam;
pub mod sim;
pub mod topp;
pub mod traj;

pub use quad::{MotorThrusts, QuadParams, RigidState};

/// Standard gravitational acceleration magnitude [m/s^2].
pub const STANDARD_GRAVITY: f64 = 9.81;
