//! The four lateral vehicle abstractions and their limits.
//!
//! Every model is a parameter-varying linear system
//! `x' = A(v_x) x + B u`, `y = C(v_x) x + D(v_x) u` whose three outputs are
//! the front-right-corner lateral position (shifted by half the vehicle
//! width), the lateral acceleration and the lateral jerk. The dynamic
//! single-track model (DM) carries five states; the steady-state cornering
//! (SSCM), kinematic (KM) and point-mass (PMM) reductions carry three.
//!
//! Units are strictly SI: metres, seconds, radians.

use nalgebra::{DMatrix, DVector, RowDVector};

use crate::error::{Error, Result};
use crate::num::{lit, Real};
use crate::propagate::LateralState;

/// Physical constants of the ego vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleParams<T> {
    /// Vehicle mass (kg).
    pub mass: T,
    /// Yaw moment of inertia about the reference point (kg m^2).
    pub yaw_inertia: T,
    /// Front tire cornering stiffness (N/rad).
    pub cornering_front: T,
    /// Rear tire cornering stiffness (N/rad).
    pub cornering_rear: T,
    /// Distance from the reference point to the front axle (m).
    pub front_axle: T,
    /// Distance from the reference point to the rear axle (m).
    pub rear_axle: T,
    /// Distance from the reference point to the front bumper (m).
    pub front_bumper: T,
    /// Overall vehicle length (m).
    pub length: T,
    /// Overall vehicle width (m).
    pub width: T,
    /// Physical steering-angle limit at the road wheel (rad).
    pub steer_angle_max: T,
    /// Physical steering-rate limit at the road wheel (rad/s).
    pub steer_rate_max: T,
    /// Gravitational acceleration (m/s^2).
    pub gravity: T,
}

impl<T: Real> Default for VehicleParams<T> {
    /// Mid-size sedan used by the built-in scenarios and benches.
    fn default() -> Self {
        Self {
            mass: lit(2000.0),
            yaw_inertia: lit(3200.0),
            cornering_front: lit(50_000.0),
            cornering_rear: lit(50_000.0),
            front_axle: lit(1.226),
            rear_axle: lit(1.550),
            front_bumper: lit(1.820),
            length: lit(4.27),
            width: lit(1.78),
            steer_angle_max: lit(44.30f64.to_radians()),
            steer_rate_max: lit(24.61f64.to_radians()),
            gravity: lit(9.81),
        }
    }
}

impl<T: Real> VehicleParams<T> {
    /// Wheel base (m).
    pub fn wheelbase(&self) -> T {
        self.front_axle + self.rear_axle
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("mass", self.mass),
            ("yaw_inertia", self.yaw_inertia),
            ("cornering_front", self.cornering_front),
            ("cornering_rear", self.cornering_rear),
            ("front_axle", self.front_axle),
            ("rear_axle", self.rear_axle),
            ("front_bumper", self.front_bumper),
            ("length", self.length),
            ("width", self.width),
            ("steer_angle_max", self.steer_angle_max),
            ("steer_rate_max", self.steer_rate_max),
            ("gravity", self.gravity),
        ];
        for (name, v) in fields {
            if !(v > T::zero()) {
                return Err(Error::Domain(format!("{name} must be strictly positive")));
            }
        }
        if self.wheelbase() > self.length {
            return Err(Error::Domain("wheelbase exceeds vehicle length".into()));
        }
        if self.front_bumper > self.length {
            return Err(Error::Domain("front bumper distance exceeds vehicle length".into()));
        }
        Ok(())
    }
}

/// Driver comfort thresholds for braking and steering.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComfortBounds<T> {
    /// Minimum (most negative) longitudinal acceleration (m/s^2).
    pub brake_accel_min: T,
    /// Minimum (most negative) longitudinal jerk (m/s^3).
    pub brake_jerk_min: T,
    /// Maximum lateral acceleration (m/s^2).
    pub lat_accel_max: T,
    /// Maximum lateral jerk (m/s^3).
    pub lat_jerk_max: T,
}

impl<T: Real> Default for ComfortBounds<T> {
    fn default() -> Self {
        Self {
            brake_accel_min: lit(-5.0),
            brake_jerk_min: lit(-10.0),
            lat_accel_max: lit(5.0),
            lat_jerk_max: lit(5.0),
        }
    }
}

impl<T: Real> ComfortBounds<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.brake_accel_min < T::zero()) {
            return Err(Error::Domain("brake_accel_min must be negative".into()));
        }
        if !(self.brake_jerk_min < T::zero()) {
            return Err(Error::Domain("brake_jerk_min must be negative".into()));
        }
        if !(self.lat_accel_max > T::zero()) {
            return Err(Error::Domain("lat_accel_max must be positive".into()));
        }
        if !(self.lat_jerk_max > T::zero()) {
            return Err(Error::Domain("lat_jerk_max must be positive".into()));
        }
        Ok(())
    }
}

/// Which lateral abstraction to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    /// Dynamic single-track model, states `[y, psi, v_s, psi', delta]`.
    Dynamic,
    /// Steady-state cornering model, states `[y, psi, delta]`.
    SteadyState,
    /// Kinematic model, states `[y, psi, delta]`.
    Kinematic,
    /// Point-mass model, states `[y, v_s, a_s]`.
    PointMass,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::Dynamic,
        ModelKind::SteadyState,
        ModelKind::Kinematic,
        ModelKind::PointMass,
    ];

    /// State dimension of the abstraction.
    pub fn dim(self) -> usize {
        match self {
            ModelKind::Dynamic => 5,
            _ => 3,
        }
    }

    /// Short name used on the command line and in reports.
    pub fn tag(self) -> &'static str {
        match self {
            ModelKind::Dynamic => "dm",
            ModelKind::SteadyState => "sscm",
            ModelKind::Kinematic => "km",
            ModelKind::PointMass => "pmm",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dm" => Ok(ModelKind::Dynamic),
            "sscm" => Ok(ModelKind::SteadyState),
            "km" => Ok(ModelKind::Kinematic),
            "pmm" => Ok(ModelKind::PointMass),
            other => Err(Error::Domain(format!("unknown model '{other}'"))),
        }
    }
}

/// State-space matrices of one abstraction at a fixed longitudinal speed.
///
/// `p` is the per-model parameter vector; it depends only on the vehicle
/// parameters, while `a`, `c`, `d` additionally depend on `v_x`. Rebuild the
/// system only when the longitudinal speed changes.
#[derive(Debug, Clone, PartialEq)]
pub struct LateralSystem<T> {
    pub kind: ModelKind,
    /// Longitudinal speed the matrices were built for (m/s).
    pub v_x: T,
    pub a: DMatrix<T>,
    pub b: DVector<T>,
    pub c: DMatrix<T>,
    pub d: DVector<T>,
    /// Model parameter vector (length 7 for DM, 5 for SSCM, 3 for KM, 0 for PMM).
    pub p: Vec<T>,
    /// Half the vehicle width; the first output row equals `y_FR + half_width`.
    pub half_width: T,
}

impl<T: Real> LateralSystem<T> {
    /// State dimension.
    pub fn dim(&self) -> usize {
        self.kind.dim()
    }

    /// First output row (`y_FR + W/2` selector). Independent of `v_x`.
    pub fn corner_row(&self) -> RowDVector<T> {
        RowDVector::from_iterator(self.dim(), self.c.row(0).iter().copied())
    }

    /// Lateral speed of the reference point for a given state.
    ///
    /// For the DM and PMM this is a state; for the SSCM and KM it is the
    /// steady-state relation `v_s = k(v_x) * delta`.
    pub fn lateral_speed(&self, x: &LateralState<T>) -> T {
        match self.kind {
            ModelKind::Dynamic => x.as_vec()[2],
            ModelKind::PointMass => x.as_vec()[1],
            ModelKind::SteadyState => {
                let (p1, p2, p3, p4) = (self.p[0], self.p[1], self.p[2], self.p[3]);
                let vx2 = self.v_x * self.v_x;
                (p1 - p3 * vx2) / (p2 + p4 * vx2) * self.v_x * x.as_vec()[2]
            }
            ModelKind::Kinematic => self.p[0] * self.v_x * x.as_vec()[2],
        }
    }
}

/// Effective steering limits after combining comfort, friction and actuator
/// bounds.
///
/// For the PMM, which has no steering states, the angle slots hold the
/// lateral-acceleration bound (m/s^2) and the rate slots the lateral-jerk
/// bound (m/s^3); the evasive manoeuvre keeps its two-phase structure with
/// those quantities playing the saturation roles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteeringLimits<T> {
    /// Effective maximum steering angle (rad).
    pub angle_max: T,
    /// Effective maximum steering rate (rad/s).
    pub rate_max: T,
    /// Comfort (steady-state acceleration) angle bound (rad).
    pub angle_steady: T,
    /// Comfort (steady-state jerk) rate bound (rad/s).
    pub rate_steady: T,
    /// Friction-ellipse angle bound (rad).
    pub angle_friction: T,
}

fn check_speed<T: Real>(v_x: T) -> Result<()> {
    if !(v_x > T::zero()) {
        return Err(Error::Domain("longitudinal speed must be strictly positive".into()));
    }
    Ok(())
}

/// Builds the state-space matrices of `kind` at longitudinal speed `v_x`.
pub fn build_system<T: Real>(
    params: &VehicleParams<T>,
    kind: ModelKind,
    v_x: T,
) -> Result<LateralSystem<T>> {
    check_speed(v_x)?;
    params.validate()?;
    let two = lit::<T>(2.0);
    let half_width = params.width / two;
    let (a, b, c, d, p) = match kind {
        ModelKind::Dynamic => {
            let m = params.mass;
            let iz = params.yaw_inertia;
            let cf = params.cornering_front;
            let cr = params.cornering_rear;
            let lf = params.front_axle;
            let lr = params.rear_axle;
            let p = vec![
                two * (cf + cr) / m,
                two * (lr * cr - lf * cf) / m,
                two * cf / m,
                two * (lr * cr - lf * cf) / iz,
                two * (lf * lf * cf + lr * lr * cr) / iz,
                two * lf * cf / iz,
                params.front_bumper,
            ];
            let (p1, p2, p3, p4, p5, p6, p7) = (p[0], p[1], p[2], p[3], p[4], p[5], p[6]);
            let z = T::zero();
            let one = T::one();
            let a = DMatrix::from_row_slice(5, 5, &[
                z, v_x, one, z, z,
                z, z, z, one, z,
                z, z, -p1 / v_x, p2 / v_x - v_x, p3,
                z, z, p4 / v_x, -p5 / v_x, p6,
                z, z, z, z, z,
            ]);
            let b = DVector::from_column_slice(&[z, z, z, z, one]);
            let c = DMatrix::from_row_slice(3, 5, &[
                one, p7, z, z, z,
                z, z, -p1 / v_x, p2 / v_x, p3,
                z, z, (p1 * p1 + p2 * p4) / (v_x * v_x),
                p1 - p2 * (p1 + p5) / (v_x * v_x),
                (p2 * p6 - p1 * p3) / v_x,
            ]);
            let d = DVector::from_column_slice(&[z, z, p3]);
            (a, b, c, d, p)
        }
        ModelKind::SteadyState => {
            let m = params.mass;
            let cf = params.cornering_front;
            let cr = params.cornering_rear;
            let lf = params.front_axle;
            let lr = params.rear_axle;
            let l = params.wheelbase();
            let p = vec![
                lr,
                l,
                m * lf / (two * cr * l),
                m / (two * l) * (lr / cf - lf / cr),
                params.front_bumper,
            ];
            let (p1, p2, p3, p4, p5) = (p[0], p[1], p[2], p[3], p[4]);
            let vx2 = v_x * v_x;
            let den = p2 + p4 * vx2;
            let z = T::zero();
            let one = T::one();
            let a = DMatrix::from_row_slice(3, 3, &[
                z, v_x, (p1 - p3 * vx2) * v_x / den,
                z, z, v_x / den,
                z, z, z,
            ]);
            let b = DVector::from_column_slice(&[z, z, one]);
            let c = DMatrix::from_row_slice(3, 3, &[
                one, p5, z,
                z, z, vx2 / den,
                z, z, z,
            ]);
            let d = DVector::from_column_slice(&[z, z, vx2 / den]);
            (a, b, c, d, p)
        }
        ModelKind::Kinematic => {
            let l = params.wheelbase();
            let p = vec![params.rear_axle / l, T::one() / l, params.front_bumper];
            let (p1, p2, p3) = (p[0], p[1], p[2]);
            let vx2 = v_x * v_x;
            let z = T::zero();
            let one = T::one();
            let a = DMatrix::from_row_slice(3, 3, &[
                z, v_x, p1 * v_x,
                z, z, p2 * v_x,
                z, z, z,
            ]);
            let b = DVector::from_column_slice(&[z, z, one]);
            let c = DMatrix::from_row_slice(3, 3, &[
                one, p3, z,
                z, z, p2 * vx2,
                z, z, z,
            ]);
            let d = DVector::from_column_slice(&[z, p1 * v_x, p2 * vx2]);
            (a, b, c, d, p)
        }
        ModelKind::PointMass => {
            let z = T::zero();
            let one = T::one();
            let a = DMatrix::from_row_slice(3, 3, &[
                z, one, z,
                z, z, one,
                z, z, z,
            ]);
            let b = DVector::from_column_slice(&[z, z, one]);
            let c = DMatrix::from_row_slice(3, 3, &[
                one, z, z,
                z, z, one,
                z, z, z,
            ]);
            let d = DVector::from_column_slice(&[z, z, one]);
            (a, b, c, d, Vec::new())
        }
    };
    Ok(LateralSystem { kind, v_x, a, b, c, d, p, half_width })
}

/// Steady-state steering-to-acceleration gain bracket `(l/v_x)^2 + (m/2)(l_r/c_f - l_f/c_r)`.
fn ss_bracket<T: Real>(params: &VehicleParams<T>, v_x: T) -> T {
    let l = params.wheelbase();
    let two = lit::<T>(2.0);
    let r = l / v_x;
    r * r
        + params.mass / two
            * (params.rear_axle / params.cornering_front
                - params.front_axle / params.cornering_rear)
}

/// Constant steering angle that produces the steady-state lateral
/// acceleration `a_ss` at speed `v_x`.
pub fn steady_state_angle<T: Real>(
    params: &VehicleParams<T>,
    kind: ModelKind,
    a_ss: T,
    v_x: T,
) -> Result<T> {
    check_speed(v_x)?;
    match kind {
        ModelKind::Dynamic | ModelKind::SteadyState => {
            Ok(a_ss / params.wheelbase() * ss_bracket(params, v_x))
        }
        ModelKind::Kinematic => Ok(a_ss * params.wheelbase() / (v_x * v_x)),
        ModelKind::PointMass => Err(Error::Unsupported {
            model: "pmm",
            what: "no steering-angle state; lateral acceleration is used directly",
        }),
    }
}

/// Constant steering rate that produces the steady-state lateral jerk `j_ss`.
pub fn steady_state_rate<T: Real>(
    params: &VehicleParams<T>,
    kind: ModelKind,
    j_ss: T,
    v_x: T,
) -> Result<T> {
    // Same bracket as the angle relation, with jerk in place of acceleration.
    steady_state_angle(params, kind, j_ss, v_x)
}

/// Steering angle beyond which the steady-state tire forces leave the
/// friction ellipse on a road with friction coefficient `mu`.
pub fn friction_angle_limit<T: Real>(params: &VehicleParams<T>, mu: T, v_x: T) -> Result<T> {
    check_speed(v_x)?;
    if !(mu > T::zero()) || mu > lit(1.2) {
        return Err(Error::Domain("friction coefficient must lie in (0, 1.2]".into()));
    }
    let lmax = if params.front_axle > params.rear_axle {
        params.front_axle
    } else {
        params.rear_axle
    };
    Ok(mu * params.gravity / lmax * ss_bracket(params, v_x))
}

/// Friction coefficient below which the friction-ellipse bound is more
/// conservative than the comfort acceleration bound `a_smax`.
pub fn friction_threshold<T: Real>(params: &VehicleParams<T>, a_smax: T) -> Result<T> {
    if !(a_smax > T::zero()) {
        return Err(Error::Domain("a_smax must be positive".into()));
    }
    let lmax = if params.front_axle > params.rear_axle {
        params.front_axle
    } else {
        params.rear_axle
    };
    Ok(a_smax / params.gravity * lmax / params.wheelbase())
}

/// Component-wise combination of comfort, friction and actuator limits.
pub fn steering_limits<T: Real>(
    params: &VehicleParams<T>,
    comfort: &ComfortBounds<T>,
    mu: T,
    v_x: T,
    kind: ModelKind,
) -> Result<SteeringLimits<T>> {
    check_speed(v_x)?;
    comfort.validate()?;
    if kind == ModelKind::PointMass {
        // Saturation roles are played by the comfort bounds themselves.
        return Ok(SteeringLimits {
            angle_max: comfort.lat_accel_max,
            rate_max: comfort.lat_jerk_max,
            angle_steady: comfort.lat_accel_max,
            rate_steady: comfort.lat_jerk_max,
            angle_friction: comfort.lat_accel_max,
        });
    }
    let angle_steady = steady_state_angle(params, kind, comfort.lat_accel_max, v_x)?;
    let rate_steady = steady_state_rate(params, kind, comfort.lat_jerk_max, v_x)?;
    let angle_friction = friction_angle_limit(params, mu, v_x)?;
    let angle_max = params.steer_angle_max.min(angle_steady).min(angle_friction);
    let rate_max = params.steer_rate_max.min(rate_steady);
    Ok(SteeringLimits { angle_max, rate_max, angle_steady, rate_steady, angle_friction })
}

/// Closed-form longitudinal position after a two-phase evasive manoeuvre.
///
/// Evaluates the analytic integral of `x' = v_x - v_s * psi` along the
/// manoeuvre (ramp at `rate_max` until `t_sa`, constant `angle_max` after)
/// for the three reduced models, selecting the single-phase expression when
/// `t_sa >= t_s`. The DM has no closed form and must be integrated
/// numerically instead.
pub fn longitudinal_closed_form<T: Real>(
    system: &LateralSystem<T>,
    x_s0: &LateralState<T>,
    t_s: T,
    t_sa: T,
    limits: &SteeringLimits<T>,
    x0: T,
) -> Result<T> {
    if t_s < T::zero() || t_sa < T::zero() {
        return Err(Error::Domain("manoeuvre times must be nonnegative".into()));
    }
    if x_s0.kind() != system.kind {
        return Err(Error::DimensionMismatch { expected: system.dim(), got: x_s0.dim() });
    }
    let v_x = system.v_x;
    let two = lit::<T>(2.0);
    let four = lit::<T>(4.0);
    let eight = lit::<T>(8.0);
    match system.kind {
        ModelKind::PointMass => Ok(x0 + v_x * t_s),
        ModelKind::SteadyState => {
            let psi0 = x_s0.as_vec()[1];
            let d0 = x_s0.as_vec()[2];
            let w = limits.rate_max;
            let dmax = limits.angle_max;
            let (p1, p2, p3, p4) = (system.p[0], system.p[1], system.p[2], system.p[3]);
            let vx2 = v_x * v_x;
            let den = p4 * vx2 + p2;
            let gain = p1 - p3 * vx2;
            if t_sa >= t_s {
                let ramp = t_s * v_x * (two * d0 + w * t_s) * gain
                    * (w * t_s * t_s * v_x + two * d0 * t_s * v_x + four * p4 * psi0 * vx2 + four * p2 * psi0)
                    / (eight * den * den);
                Ok(x0 + v_x * t_s - ramp)
            } else {
                let ramp = t_sa * v_x * (two * d0 + w * t_sa) * gain
                    * (w * t_sa * t_sa * v_x + two * d0 * t_sa * v_x + four * p4 * psi0 * vx2 + four * p2 * psi0)
                    / (eight * den * den);
                let hold = dmax * v_x * gain * (t_sa - t_s)
                    * (two * p2 * psi0 + two * p4 * psi0 * vx2 + w * t_sa * t_sa * v_x
                        + two * d0 * t_sa * v_x - dmax * t_sa * v_x + dmax * t_s * v_x)
                    / (two * den * den);
                Ok(x0 + v_x * t_s - ramp + hold)
            }
        }
        ModelKind::Kinematic => {
            let psi0 = x_s0.as_vec()[1];
            let d0 = x_s0.as_vec()[2];
            let w = limits.rate_max;
            let dmax = limits.angle_max;
            // p = [l_r/l, 1/l, L_f]; the printed form uses l_r and l directly.
            let p2 = system.p[1];
            let lr_over_l = system.p[0];
            if t_sa >= t_s {
                let ramp = lr_over_l * t_s * v_x * (two * d0 + w * t_s)
                    * (w * p2 * v_x * t_s * t_s + two * d0 * p2 * v_x * t_s + four * psi0)
                    / eight;
                Ok(x0 + v_x * t_s - ramp)
            } else {
                let ramp = lr_over_l * t_sa * v_x * (two * d0 + w * t_sa)
                    * (w * p2 * v_x * t_sa * t_sa + two * d0 * p2 * v_x * t_sa + four * psi0)
                    / eight;
                let hold = dmax * lr_over_l * v_x * (t_sa - t_s)
                    * (two * psi0 + two * d0 * p2 * t_sa * v_x - dmax * p2 * t_sa * v_x
                        + dmax * p2 * t_s * v_x + w * p2 * t_sa * t_sa * v_x)
                    / two;
                Ok(x0 + v_x * t_s - ramp + hold)
            }
        }
        ModelKind::Dynamic => Err(Error::Unsupported {
            model: "dm",
            what: "no closed-form longitudinal integral; integrate numerically",
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagate::{output, propagate, LateralState};
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn kmh(v: f64) -> f64 {
        v / 3.6
    }

    /// Fixed-step RK4 on `x' = A x + B u`, independent of the exponential path.
    fn rk4(a: &DMatrix<f64>, b: &DVector<f64>, x0: &DVector<f64>, u: f64, t: f64, dt: f64) -> DVector<f64> {
        let f = |x: &DVector<f64>| a * x + b * u;
        let mut x = x0.clone();
        let mut remaining = t;
        while remaining > 0.0 {
            let h = remaining.min(dt);
            let k1 = f(&x);
            let k2 = f(&(&x + &k1 * (h / 2.0)));
            let k3 = f(&(&x + &k2 * (h / 2.0)));
            let k4 = f(&(&x + &k3 * h));
            x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            remaining -= h;
        }
        x
    }

    #[test]
    fn pmm_matrices_match_printed_forms() {
        let p = VehicleParams::<f64>::default();
        let sys = build_system(&p, ModelKind::PointMass, kmh(80.0)).unwrap();
        let a = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        assert_eq!(sys.a, a);
        assert_eq!(sys.b, DVector::from_column_slice(&[0.0, 0.0, 1.0]));
        let c = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        assert_eq!(sys.c, c);
        assert_eq!(sys.d, DVector::from_column_slice(&[0.0, 0.0, 1.0]));
    }

    #[test]
    fn dm_matrix_structure() {
        let p = VehicleParams::<f64>::default();
        let vx = kmh(80.0);
        let sys = build_system(&p, ModelKind::Dynamic, vx).unwrap();
        assert_eq!(sys.a[(0, 1)], vx);
        assert_eq!(sys.a[(0, 2)], 1.0);
        for c in 0..5 {
            assert_eq!(sys.a[(4, c)], 0.0, "steering-angle row is input-driven only");
        }
        assert_eq!(sys.b[4], 1.0);
        // First output row selects y + L_f psi and is speed-independent.
        let other = build_system(&p, ModelKind::Dynamic, kmh(123.0)).unwrap();
        assert_eq!(sys.c.row(0), other.c.row(0));
        assert_eq!(sys.c[(0, 0)], 1.0);
        assert_eq!(sys.c[(0, 1)], p.front_bumper);
    }

    #[test]
    fn km_steady_state_yaw_rate_matches_integration() {
        // Constant steering angle on the KM must settle at yaw rate v_x*delta/l.
        let p = VehicleParams::<f64>::default();
        let vx = kmh(70.0);
        let sys = build_system(&p, ModelKind::Kinematic, vx).unwrap();
        let delta = 0.02;
        let x0 = DVector::from_column_slice(&[0.0, 0.0, delta]);
        let x = rk4(&sys.a, &sys.b, &x0, 0.0, 3.0, 1e-3);
        let psi_rate = (x[1] - rk4(&sys.a, &sys.b, &x0, 0.0, 3.0 - 1e-3, 1e-3)[1]) / 1e-3;
        let expected = vx * delta / p.wheelbase();
        assert!((psi_rate - expected).abs() < 1e-9, "{psi_rate} vs {expected}");
    }

    #[test]
    fn steady_state_angle_reaches_requested_acceleration() {
        // Hold delta_ss on the DM until transients die; measured a_s must be 5.
        let p = VehicleParams::<f64>::default();
        let vx = kmh(80.0);
        let delta = steady_state_angle(&p, ModelKind::Dynamic, 5.0, vx).unwrap();
        assert!((delta - 0.0398).abs() < 2e-4, "delta_ss = {delta}");
        let sys = build_system(&p, ModelKind::Dynamic, vx).unwrap();
        let x0 = LateralState::new(ModelKind::Dynamic, &[0.0, 0.0, 0.0, 0.0, delta]).unwrap();
        let x = propagate(&sys, &x0, 0.0, 5.0).unwrap();
        let y = output(&sys, &x, 0.0).unwrap();
        assert!((y[1] - 5.0).abs() < 1e-3, "steady a_s = {}", y[1]);
    }

    #[test]
    fn steady_state_angle_linear_and_zero() {
        let p = VehicleParams::<f64>::default();
        assert_eq!(steady_state_angle(&p, ModelKind::Dynamic, 0.0, 20.0).unwrap(), 0.0);
        let one = steady_state_angle(&p, ModelKind::Dynamic, 1.0, 20.0).unwrap();
        let five = steady_state_angle(&p, ModelKind::Dynamic, 5.0, 20.0).unwrap();
        assert!((five - 5.0 * one).abs() < 1e-15);
        assert!(steady_state_angle(&p, ModelKind::PointMass, 1.0, 20.0).is_err());
        assert!(steady_state_angle(&p, ModelKind::Dynamic, 1.0, 0.0).is_err());
    }

    #[test]
    fn steady_state_curves_decrease_with_speed() {
        let p = VehicleParams::<f64>::default();
        let mut last_angle = f64::INFINITY;
        let mut last_rate = f64::INFINITY;
        for v in (30..=120).step_by(5) {
            let vx = kmh(v as f64);
            let a = steady_state_angle(&p, ModelKind::Dynamic, 5.0, vx).unwrap();
            let r = steady_state_rate(&p, ModelKind::Dynamic, 5.0, vx).unwrap();
            assert!(a < last_angle && r < last_rate, "monotone decrease at {v} km/h");
            assert!((a - r).abs() < 1e-15, "same bracket for angle and rate");
            last_angle = a;
            last_rate = r;
        }
    }

    #[test]
    fn friction_limit_examples() {
        let p = VehicleParams::<f64>::default();
        let vx = kmh(80.0);
        // Above the threshold friction coefficient the comfort bound binds.
        let comfort = steady_state_angle(&p, ModelKind::Dynamic, 5.0, vx).unwrap();
        assert!(friction_angle_limit(&p, 0.3, vx).unwrap() > comfort);
        // Linear in mu near zero.
        let tiny = friction_angle_limit(&p, 1e-6, vx).unwrap();
        assert!(tiny > 0.0 && tiny < 1e-6);
        // At the threshold the two bounds agree to 0.5 %.
        let mu_star = friction_threshold(&p, 5.0).unwrap();
        let at = friction_angle_limit(&p, mu_star, vx).unwrap();
        assert!((at - comfort).abs() / comfort < 5e-3);
        assert!(friction_angle_limit(&p, 0.0, vx).is_err());
        assert!(friction_angle_limit(&p, 1.3, vx).is_err());
    }

    #[test]
    fn friction_threshold_values() {
        let p = VehicleParams::<f64>::default();
        let mu = friction_threshold(&p, 5.0).unwrap();
        assert!((mu - 0.285).abs() < 0.005, "mu* = {mu}");
        let half = friction_threshold(&p, 2.5).unwrap();
        assert!((half - 0.1423).abs() < 0.0025, "half threshold = {half}");
        assert!((half - mu / 2.0).abs() < 1e-12);
        let mut sym = p;
        sym.front_axle = 1.4;
        sym.rear_axle = 1.4;
        assert!((friction_threshold(&sym, sym.gravity).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn friction_threshold_is_the_argmin_switch() {
        let p = VehicleParams::<f64>::default();
        let vx = kmh(80.0);
        let a_smax = 5.0;
        let comfort = steady_state_angle(&p, ModelKind::Dynamic, a_smax, vx).unwrap();
        let mu_star = friction_threshold(&p, a_smax).unwrap();
        // Bisection on the sign of (friction limit - comfort limit) finds mu*.
        let f = |mu: f64| friction_angle_limit(&p, mu, vx).unwrap() - comfort;
        let (mut lo, mut hi) = (1e-3, 1.2);
        assert!(f(lo) < 0.0 && f(hi) > 0.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((0.5 * (lo + hi) - mu_star).abs() < 1e-9);
    }

    #[test]
    fn steering_limits_are_component_wise_minima() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let mut p = VehicleParams::<f64>::default();
            p.mass *= rng.gen_range(0.8..1.2);
            p.cornering_front *= rng.gen_range(0.8..1.2);
            p.cornering_rear *= rng.gen_range(0.8..1.2);
            p.front_axle *= rng.gen_range(0.9..1.1);
            p.rear_axle *= rng.gen_range(0.9..1.1);
            let comfort = ComfortBounds {
                lat_accel_max: rng.gen_range(1.0..8.0),
                lat_jerk_max: rng.gen_range(1.0..8.0),
                ..ComfortBounds::default()
            };
            let mu = rng.gen_range(0.05..1.2);
            let vx = rng.gen_range(8.0..36.0);
            let kind = [ModelKind::Dynamic, ModelKind::SteadyState, ModelKind::Kinematic]
                [rng.gen_range(0..3)];
            let lim = steering_limits(&p, &comfort, mu, vx, kind).unwrap();
            let expected_angle = p
                .steer_angle_max
                .min(steady_state_angle(&p, kind, comfort.lat_accel_max, vx).unwrap())
                .min(friction_angle_limit(&p, mu, vx).unwrap());
            let expected_rate = p
                .steer_rate_max
                .min(steady_state_rate(&p, kind, comfort.lat_jerk_max, vx).unwrap());
            assert_eq!(lim.angle_max, expected_angle);
            assert_eq!(lim.rate_max, expected_rate);
            assert!(lim.angle_max >= 0.0 && lim.rate_max >= 0.0);
        }
    }

    #[test]
    fn steering_limits_binding_cases() {
        let p = VehicleParams::<f64>::default();
        let comfort = ComfortBounds::default();
        let vx = kmh(80.0);
        let high_mu = steering_limits(&p, &comfort, 0.9, vx, ModelKind::Dynamic).unwrap();
        assert_eq!(high_mu.angle_max, high_mu.angle_steady, "comfort binds on good roads");
        let low_mu = steering_limits(&p, &comfort, 0.1, vx, ModelKind::Dynamic).unwrap();
        assert_eq!(low_mu.angle_max, low_mu.angle_friction, "friction binds on ice");
        // With huge comfort bounds at low speed the physical limits saturate.
        let huge = ComfortBounds { lat_accel_max: 1e6, lat_jerk_max: 1e6, ..comfort };
        let lim = steering_limits(&p, &huge, 1.2, 8.0, ModelKind::Dynamic).unwrap();
        assert_eq!(lim.angle_max, p.steer_angle_max);
        assert_eq!(lim.rate_max, p.steer_rate_max);
    }

    #[test]
    fn steering_limits_pmm_role_mapping() {
        let p = VehicleParams::<f64>::default();
        let comfort = ComfortBounds::default();
        let lim = steering_limits(&p, &comfort, 1.0, 20.0, ModelKind::PointMass).unwrap();
        assert_eq!(lim.angle_max, comfort.lat_accel_max);
        assert_eq!(lim.rate_max, comfort.lat_jerk_max);
    }

    #[test]
    fn closed_form_trivial_cases() {
        let p = VehicleParams::<f64>::default();
        let comfort = ComfortBounds::default();
        let vx = kmh(70.0);
        let lim_pmm = steering_limits(&p, &comfort, 1.0, vx, ModelKind::PointMass).unwrap();
        let sys_pmm = build_system(&p, ModelKind::PointMass, vx).unwrap();
        let x0 = LateralState::new(ModelKind::PointMass, &[1.0, 2.0, 3.0]).unwrap();
        let x = longitudinal_closed_form(&sys_pmm, &x0, 2.5, 1.0, &lim_pmm, 7.0).unwrap();
        assert_eq!(x, 7.0 + vx * 2.5);

        let lim_km = steering_limits(&p, &comfort, 1.0, vx, ModelKind::Kinematic).unwrap();
        let sys_km = build_system(&p, ModelKind::Kinematic, vx).unwrap();
        let zero = LateralState::zero(ModelKind::Kinematic);
        let x = longitudinal_closed_form(&sys_km, &zero, 0.0, 0.0, &lim_km, 3.0).unwrap();
        assert_eq!(x, 3.0);

        let sys_dm = build_system(&p, ModelKind::Dynamic, vx).unwrap();
        let zero_dm = LateralState::zero(ModelKind::Dynamic);
        let lim_dm = steering_limits(&p, &comfort, 1.0, vx, ModelKind::Dynamic).unwrap();
        assert!(longitudinal_closed_form(&sys_dm, &zero_dm, 1.0, 1.0, &lim_dm, 0.0).is_err());
    }

    #[test]
    fn builders_are_deterministic() {
        let p = VehicleParams::<f64>::default();
        for kind in ModelKind::ALL {
            let s1 = build_system(&p, kind, 23.456).unwrap();
            let s2 = build_system(&p, kind, 23.456).unwrap();
            assert_eq!(s1, s2);
        }
        assert!(build_system(&p, ModelKind::Dynamic, -1.0).is_err());
        assert!(build_system(&p, ModelKind::Dynamic, 0.0).is_err());
    }

    #[test]
    fn params_validation() {
        let mut p = VehicleParams::<f64>::default();
        assert!(p.validate().is_ok());
        p.mass = 0.0;
        assert!(p.validate().is_err());
        let mut p = VehicleParams::<f64>::default();
        p.front_bumper = p.length + 1.0;
        assert!(p.validate().is_err());
    }
}
