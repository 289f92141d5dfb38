//! Intervention timing and critical zones for comfortable collision
//! avoidance with a slower lead road user.
//!
//! The crate models the latest moment an ego vehicle can still brake or
//! steer away from a lead vehicle without exceeding driver-comfort bounds on
//! acceleration, jerk, steering angle and steering rate:
//!
//! * [`models`] builds the four lateral abstractions (dynamic single-track,
//!   steady-state cornering, kinematic, point mass) as parameter-varying
//!   linear systems, with their steering limits and closed-form
//!   longitudinal integrals;
//! * [`propagate`] evolves states exactly under piecewise-constant inputs
//!   via matrix exponentials of the augmented autonomous system;
//! * [`braking`] computes the latest comfortable brake in closed form;
//! * [`steering`] finds the steering intervention time with Newton-Raphson
//!   or Halley iterations and runs the three avoid-by-steering algorithms;
//! * [`zone`] sweeps lateral offsets into critical-zone boundaries and
//!   compares them across models and algorithms.
//!
//! Everything is generic over the scalar type through [`Real`]; use the
//! `*64` aliases (or plain `f64` parameters) unless single precision is
//! specifically needed.

pub mod braking;
pub mod error;
pub mod models;
mod num;
pub mod propagate;
pub mod scenario;
pub mod steering;
pub mod zone;

pub use error::{Error, Result};
pub use num::Real;

pub use braking::{BrakeDecision, BrakeOutcome};
pub use models::{ComfortBounds, LateralSystem, ModelKind, SteeringLimits, VehicleParams};
pub use propagate::{BrakeState, LateralInit, LateralState, TransitionPair};
pub use scenario::Scenario;
pub use steering::{
    RootConfig, SolverKind, SteerConfig, SteerOutcome, SteeringAlgorithm, SteeringDecision,
};
pub use zone::{ZoneBoundary, ZoneComparison, ZoneConfig};

/// Double-precision aliases (the default working precision).
pub type VehicleParams64 = VehicleParams<f64>;
pub type ComfortBounds64 = ComfortBounds<f64>;
pub type LateralSystem64 = LateralSystem<f64>;
pub type LateralState64 = LateralState<f64>;
pub type Scenario64 = Scenario<f64>;
pub type RootConfig64 = RootConfig<f64>;
pub type SteerConfig64 = SteerConfig<f64>;
pub type ZoneConfig64 = ZoneConfig<f64>;
pub type ZoneBoundary64 = ZoneBoundary<f64>;

/// Single-precision aliases.
pub type VehicleParams32 = VehicleParams<f32>;
pub type ComfortBounds32 = ComfortBounds<f32>;
pub type LateralSystem32 = LateralSystem<f32>;
pub type LateralState32 = LateralState<f32>;
pub type Scenario32 = Scenario<f32>;
