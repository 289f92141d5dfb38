//! Latest comfortable braking in closed form.
//!
//! The driver model holds the comfort jerk floor until either the relative
//! speed reaches zero or the comfort deceleration floor is reached, then
//! holds that deceleration. Both phases have polynomial transition matrices,
//! so the braking time and final state come out in closed form.

use crate::error::{Error, Result};
use crate::models::ComfortBounds;
use crate::num::{lit, Real};
use crate::propagate::{propagate_brake, BrakeState};

/// Result of the closed-form braking computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrakeOutcome<T> {
    /// Total braking duration until the relative speed is zero (s).
    pub t_b: T,
    /// Duration a pure jerk-phase solution would need (s).
    pub t_bj: T,
    /// Time at which the deceleration floor is reached (s).
    pub t_ba: T,
    /// Relative state at `t_b`.
    pub final_state: BrakeState<T>,
    /// Whether the collision is avoided with at least the safety margin.
    pub avoidable: bool,
}

/// Outcome of the braking check for a scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BrakeDecision<T> {
    /// The ego is not closing in on the lead; nothing to do.
    NotNeeded,
    /// Braking computed; see the outcome for the verdict.
    Computed(BrakeOutcome<T>),
}

/// Time for the relative speed to reach zero under the constant comfort jerk.
///
/// Nonnegative root of the phase-1 quadratic. The discriminant strictly
/// exceeds `accel^2` whenever the ego is closing in, so the root is real and
/// the other root is negative.
pub fn jerk_phase_time<T: Real>(x0: &BrakeState<T>, comfort: &ComfortBounds<T>) -> Result<T> {
    comfort.validate()?;
    if !(x0.dv > T::zero()) {
        return Err(Error::ScenarioInvalid(
            "relative speed is not positive; no braking needed".into(),
        ));
    }
    let j = comfort.brake_jerk_min;
    let a0 = x0.accel;
    let two = lit::<T>(2.0);
    let disc = (a0 * a0 - two * j * x0.dv).sqrt();
    Ok((-a0 - disc) / j)
}

/// Time to ramp from the current acceleration down to the comfort floor,
/// clamped to zero if the driver already brakes at least that hard.
pub fn accel_phase_time<T: Real>(accel0: T, comfort: &ComfortBounds<T>) -> T {
    let t = (comfort.brake_accel_min - accel0) / comfort.brake_jerk_min;
    if t > T::zero() {
        t
    } else {
        T::zero()
    }
}

/// Phase logic shared by the verdict and boundary computations.
///
/// Requires `dv > 0`. A driver already braking harder than the comfort floor
/// holds the current deceleration instead of relaxing it.
fn solve<T: Real>(
    x0: &BrakeState<T>,
    comfort: &ComfortBounds<T>,
) -> Result<(T, T, T, BrakeState<T>)> {
    let j = comfort.brake_jerk_min;
    let t_bj = jerk_phase_time(x0, comfort)?;
    let t_ba = accel_phase_time(x0.accel, comfort);
    if x0.accel <= comfort.brake_accel_min {
        let t_b = -x0.dv / x0.accel;
        let end = propagate_brake(x0, T::zero(), t_b)?;
        Ok((t_b, t_bj, t_ba, end))
    } else if t_ba >= t_bj {
        let end = propagate_brake(x0, j, t_bj)?;
        Ok((t_bj, t_bj, t_ba, end))
    } else {
        let at_floor = propagate_brake(x0, j, t_ba)?;
        let t_b = t_ba - at_floor.dv / comfort.brake_accel_min;
        let end = propagate_brake(&at_floor, T::zero(), t_b - t_ba)?;
        Ok((t_b, t_bj, t_ba, end))
    }
}

/// Closed-form latest comfortable braking with the avoid verdict.
///
/// The ego must still be outside the safety margin (`dx <= -x_margin`);
/// a non-closing scenario (`dv <= 0`) yields [`BrakeDecision::NotNeeded`].
pub fn avoid_by_braking<T: Real>(
    x0: &BrakeState<T>,
    comfort: &ComfortBounds<T>,
    x_margin: T,
) -> Result<BrakeDecision<T>> {
    comfort.validate()?;
    if x_margin < T::zero() {
        return Err(Error::ScenarioInvalid("x_margin must be nonnegative".into()));
    }
    if !(x0.dv > T::zero()) {
        return Ok(BrakeDecision::NotNeeded);
    }
    if !(x0.dx <= -x_margin) {
        return Err(Error::ScenarioInvalid(
            "initial gap already inside the safety margin (dx > -x_margin)".into(),
        ));
    }
    let (t_b, t_bj, t_ba, final_state) = solve(x0, comfort)?;
    let avoidable = -final_state.dx >= x_margin;
    Ok(BrakeDecision::Computed(BrakeOutcome { t_b, t_bj, t_ba, final_state, avoidable }))
}

/// Relative distance the latest comfortable brake consumes, with its
/// duration.
///
/// This is the braking critical-zone boundary: a scenario is brake-avoidable
/// exactly when its initial gap is at least this distance plus the margin.
/// It depends only on the relative speed and the initial deceleration, never
/// on the lateral model.
pub fn critical_brake_distance<T: Real>(
    dv: T,
    accel0: T,
    comfort: &ComfortBounds<T>,
) -> Result<(T, T)> {
    if !(dv > T::zero()) {
        return Ok((T::zero(), T::zero()));
    }
    let start = BrakeState { dx: T::zero(), dv, accel: accel0 };
    let (t_b, _, _, end) = solve(&start, comfort)?;
    Ok((end.dx, t_b))
}
