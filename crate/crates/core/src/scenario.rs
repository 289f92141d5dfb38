//! Conflict scenario description.
//!
//! The ego reference point sits at the origin at `t = 0`; the lead vehicle's
//! rear end is `x_lead` ahead and its rear-left corner `y_lead` to the left.
//! All quantities are SI.

use crate::error::{Error, Result};
use crate::models::{ComfortBounds, ModelKind, VehicleParams};
use crate::num::{lit, Real};
use crate::propagate::{BrakeState, LateralInit, LateralState};

/// Initial ego/lead kinematics, margins, friction and driver state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario<T> {
    pub params: VehicleParams<T>,
    pub comfort: ComfortBounds<T>,
    /// Ego longitudinal speed (m/s).
    pub v_x: T,
    /// Lead longitudinal speed (m/s).
    pub v_lead: T,
    /// Lead rear position ahead of the ego reference point (m).
    pub x_lead: T,
    /// Lead rear-left corner lateral position (m).
    pub y_lead: T,
    /// Longitudinal safety margin (m).
    pub x_margin: T,
    /// Lateral safety margin (m).
    pub y_margin: T,
    /// Road friction coefficient.
    pub mu: T,
    /// Initial lateral condition of the ego vehicle.
    pub init: LateralInit<T>,
    /// Initial ego longitudinal acceleration (m/s^2).
    pub brake_accel0: T,
}

impl<T: Real> Default for Scenario<T> {
    /// 70/20 km/h conflict, 30 m bumper gap, full-lane lateral offset.
    fn default() -> Self {
        let params = VehicleParams::default();
        let comfort = ComfortBounds::default();
        let mut s = Self {
            params,
            comfort,
            v_x: lit(70.0 / 3.6),
            v_lead: lit(20.0 / 3.6),
            x_lead: T::zero(),
            y_lead: T::zero(),
            x_margin: T::zero(),
            y_margin: T::zero(),
            mu: T::one(),
            init: LateralInit::default(),
            brake_accel0: T::zero(),
        };
        s.set_bumper_gap(lit(30.0));
        s.set_corner_offset(lit(-3.7));
        s
    }
}

impl<T: Real> Scenario<T> {
    /// Front-right-corner lateral position at `t = 0` (small-angle geometry).
    pub fn corner_y0(&self) -> T {
        self.params.front_bumper * self.init.heading - self.params.width / lit(2.0)
    }

    /// Initial bumper gap `x_lead - L_f` (m).
    pub fn bumper_gap(&self) -> T {
        self.x_lead - self.params.front_bumper
    }

    /// Initial lateral offset of the front-right corner below the safety
    /// line, `y_FR(0) - y_lead - y_margin` (m; negative in a conflict).
    pub fn corner_offset(&self) -> T {
        self.corner_y0() - self.y_lead - self.y_margin
    }

    /// Places the lead so the initial bumper gap is `gap`.
    pub fn set_bumper_gap(&mut self, gap: T) {
        self.x_lead = gap + self.params.front_bumper;
    }

    /// Places the lead corner so the initial lateral offset is `offset`.
    pub fn set_corner_offset(&mut self, offset: T) {
        self.y_lead = self.corner_y0() - self.y_margin - offset;
    }

    /// Relative braking state at `t = 0`.
    pub fn brake_state(&self) -> BrakeState<T> {
        BrakeState {
            dx: self.params.front_bumper - self.x_lead,
            dv: self.v_x - self.v_lead,
            accel: self.brake_accel0,
        }
    }

    /// Initial lateral state vector for a model abstraction.
    pub fn initial_state(&self, kind: ModelKind) -> LateralState<T> {
        LateralState::from_init(kind, &self.init)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.comfort.validate()?;
        if !(self.v_x > T::zero()) {
            return Err(Error::ScenarioInvalid("ego speed must be positive".into()));
        }
        if self.v_lead < T::zero() {
            return Err(Error::ScenarioInvalid("lead speed must be nonnegative".into()));
        }
        if !(self.v_x > self.v_lead) {
            return Err(Error::ScenarioInvalid("ego must be faster than the lead".into()));
        }
        if self.x_margin < T::zero() || self.y_margin < T::zero() {
            return Err(Error::ScenarioInvalid("margins must be nonnegative".into()));
        }
        if !(self.mu > T::zero()) || self.mu > lit(1.2) {
            return Err(Error::ScenarioInvalid("friction must lie in (0, 1.2]".into()));
        }
        Ok(())
    }
}
