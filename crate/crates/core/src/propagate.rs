//! Exact state propagation under piecewise-constant inputs.
//!
//! For a constant input the lateral systems evolve as
//! `x(t) = A_t x(0) + B_t u` where the pair `(A_t, B_t)` is read off the
//! matrix exponential of the augmented autonomous system
//! `[[A, B], [0, 0]]`. The braking system is small enough that its
//! transition pair is written out explicitly.

use std::cell::RefCell;

use nalgebra::{Complex, ComplexField, DMatrix, DVector, Vector3};

use crate::error::{Error, Result};
use crate::models::{LateralSystem, ModelKind};
use crate::num::{lit, Real};

/// Lateral state vector tagged with its model abstraction.
///
/// Layouts: DM `[y, psi, v_s, psi', delta]`; SSCM/KM `[y, psi, delta]`;
/// PMM `[y, v_s, a_s]`. Angles in radians.
#[derive(Debug, Clone, PartialEq)]
pub struct LateralState<T> {
    kind: ModelKind,
    v: DVector<T>,
}

/// Initial lateral condition in physical terms; fields that a model does not
/// represent are dropped when the state vector is formed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LateralInit<T> {
    /// Heading (yaw) angle (rad).
    pub heading: T,
    /// Lateral speed of the reference point (m/s).
    pub lateral_speed: T,
    /// Yaw rate (rad/s).
    pub yaw_rate: T,
    /// Steering angle (rad).
    pub steer_angle: T,
}

impl<T: Real> Default for LateralInit<T> {
    fn default() -> Self {
        Self {
            heading: T::zero(),
            lateral_speed: T::zero(),
            yaw_rate: T::zero(),
            steer_angle: T::zero(),
        }
    }
}

impl<T: Real> LateralState<T> {
    pub fn zero(kind: ModelKind) -> Self {
        Self { kind, v: DVector::zeros(kind.dim()) }
    }

    pub fn new(kind: ModelKind, components: &[T]) -> Result<Self> {
        if components.len() != kind.dim() {
            return Err(Error::DimensionMismatch { expected: kind.dim(), got: components.len() });
        }
        Ok(Self { kind, v: DVector::from_column_slice(components) })
    }

    pub fn from_vec(kind: ModelKind, v: DVector<T>) -> Result<Self> {
        if v.len() != kind.dim() {
            return Err(Error::DimensionMismatch { expected: kind.dim(), got: v.len() });
        }
        Ok(Self { kind, v })
    }

    /// Builds the model state for a physical initial condition with `y = 0`.
    ///
    /// The PMM keeps only the lateral speed (its third state is lateral
    /// acceleration, which starts at zero); the SSCM and KM keep heading and
    /// steering angle.
    pub fn from_init(kind: ModelKind, init: &LateralInit<T>) -> Self {
        let z = T::zero();
        let v = match kind {
            ModelKind::Dynamic => DVector::from_column_slice(&[
                z,
                init.heading,
                init.lateral_speed,
                init.yaw_rate,
                init.steer_angle,
            ]),
            ModelKind::SteadyState | ModelKind::Kinematic => {
                DVector::from_column_slice(&[z, init.heading, init.steer_angle])
            }
            ModelKind::PointMass => DVector::from_column_slice(&[z, init.lateral_speed, z]),
        };
        Self { kind, v }
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.v.len()
    }

    pub fn as_vec(&self) -> &DVector<T> {
        &self.v
    }

    /// Lateral position of the reference point (m).
    pub fn y(&self) -> T {
        self.v[0]
    }

    /// Heading angle (rad); zero for the PMM, which carries none.
    pub fn heading(&self) -> T {
        match self.kind {
            ModelKind::PointMass => T::zero(),
            _ => self.v[1],
        }
    }

    /// The state that saturates during the manoeuvre: steering angle for the
    /// steered models, lateral acceleration for the PMM.
    pub fn saturating_state(&self) -> T {
        match self.kind {
            ModelKind::Dynamic => self.v[4],
            ModelKind::SteadyState | ModelKind::Kinematic | ModelKind::PointMass => self.v[2],
        }
    }
}

/// Relative longitudinal state used by the braking model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrakeState<T> {
    /// Relative gap `x_b + L_f - x_L` (m); negative while the ego is behind.
    pub dx: T,
    /// Relative speed `v_b - v_L` (m/s).
    pub dv: T,
    /// Ego longitudinal acceleration (m/s^2).
    pub accel: T,
}

/// State transition matrix and input-effect column at one horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionPair<T> {
    pub a_t: DMatrix<T>,
    pub b_t: DVector<T>,
}

/// Closed-form braking transition pair at horizon `t`.
pub fn brake_transition<T: Real>(t: T) -> Result<TransitionPair<T>> {
    if t < T::zero() {
        return Err(Error::Domain("braking horizon must be nonnegative".into()));
    }
    let one = T::one();
    let z = T::zero();
    let half = lit::<T>(0.5);
    let sixth = lit::<T>(1.0 / 6.0);
    let a_t = DMatrix::from_row_slice(3, 3, &[
        one, t, half * t * t,
        z, one, t,
        z, z, one,
    ]);
    let b_t = DVector::from_column_slice(&[sixth * t * t * t, half * t * t, t]);
    Ok(TransitionPair { a_t, b_t })
}

/// Propagates a braking state under constant jerk `u` for `t` seconds.
pub fn propagate_brake<T: Real>(x: &BrakeState<T>, u: T, t: T) -> Result<BrakeState<T>> {
    let tr = brake_transition(t)?;
    let v = DVector::from_column_slice(&[x.dx, x.dv, x.accel]);
    let out = &tr.a_t * v + &tr.b_t * u;
    Ok(BrakeState { dx: out[0], dv: out[1], accel: out[2] })
}

/// Exact steering transition pair at horizon `t` via the matrix exponential
/// of the augmented `(n+1)`-dimensional autonomous system.
///
/// Valid for any finite `t` (the root finders probe negative horizons while
/// bracketing no-risk geometries).
pub fn steer_transition<T: Real>(system: &LateralSystem<T>, t: T) -> TransitionPair<T> {
    let n = system.dim();
    let mut aug = DMatrix::zeros(n + 1, n + 1);
    aug.view_mut((0, 0), (n, n)).copy_from(&system.a);
    aug.view_mut((0, n), (n, 1)).copy_from(&system.b);
    let e = (aug * t).exp();
    let a_t = e.view((0, 0), (n, n)).into_owned();
    let b_t = DVector::from_iterator(n, e.view((0, n), (n, 1)).iter().copied());
    TransitionPair { a_t, b_t }
}

/// Propagates `x0` under constant input `u_const` for `t` seconds.
pub fn propagate<T: Real>(
    system: &LateralSystem<T>,
    x0: &LateralState<T>,
    u_const: T,
    t: T,
) -> Result<LateralState<T>> {
    if x0.dim() != system.dim() || x0.kind() != system.kind {
        return Err(Error::DimensionMismatch { expected: system.dim(), got: x0.dim() });
    }
    let tr = steer_transition(system, t);
    let v = &tr.a_t * x0.as_vec() + &tr.b_t * u_const;
    LateralState::from_vec(system.kind, v)
}

/// Output vector `[y_FR + W/2, a_s, j_s]` for a state and input.
pub fn output<T: Real>(
    system: &LateralSystem<T>,
    x: &LateralState<T>,
    u: T,
) -> Result<Vector3<T>> {
    if x.dim() != system.dim() || x.kind() != system.kind {
        return Err(Error::DimensionMismatch { expected: system.dim(), got: x.dim() });
    }
    let y = &system.c * x.as_vec() + &system.d * u;
    Ok(Vector3::new(y[0], y[1], y[2]))
}

/// Front-right-corner lateral position for a state.
pub fn corner_position<T: Real>(system: &LateralSystem<T>, x: &LateralState<T>) -> T {
    let row = system.c.row(0);
    let mut acc = T::zero();
    for (i, v) in x.as_vec().iter().enumerate() {
        acc += row[i] * *v;
    }
    acc - system.half_width
}

/// Per-solve memo of transition pairs keyed by horizon.
///
/// The exponential dominates every solver iteration; within one solve the
/// same horizon is requested by the residual evaluation, the final state
/// reconstruction and the longitudinal integration, so a tiny cache pays for
/// itself. Caches are per-instance and never shared across threads.
pub struct Propagator<'a, T: Real> {
    system: &'a LateralSystem<T>,
    cache: RefCell<Vec<(T, TransitionPair<T>)>>,
}

const CACHE_CAP: usize = 8;

impl<'a, T: Real> Propagator<'a, T> {
    pub fn new(system: &'a LateralSystem<T>) -> Self {
        Self { system, cache: RefCell::new(Vec::with_capacity(CACHE_CAP)) }
    }

    pub fn system(&self) -> &LateralSystem<T> {
        self.system
    }

    /// Transition pair at horizon `t`, memoized.
    pub fn transition(&self, t: T) -> TransitionPair<T> {
        let mut cache = self.cache.borrow_mut();
        if let Some(pos) = cache.iter().position(|(key, _)| *key == t) {
            let entry = cache.remove(pos);
            let pair = entry.1.clone();
            cache.push(entry);
            return pair;
        }
        let pair = steer_transition(self.system, t);
        if cache.len() == CACHE_CAP {
            cache.remove(0);
        }
        cache.push((t, pair.clone()));
        pair
    }

    /// Propagates through the memoized transition pair.
    pub fn state_at(&self, x0: &LateralState<T>, u: T, t: T) -> LateralState<T> {
        let tr = self.transition(t);
        let v = &tr.a_t * x0.as_vec() + &tr.b_t * u;
        LateralState::from_vec(self.system.kind, v).expect("dimensions fixed by system")
    }
}

/// Compares the general matrix exponential of the augmented DM system against
/// the route through a numerically computed Jordan decomposition and returns
/// their maximum element-wise deviation.
///
/// Diagnostic only: the zero eigenvalue of the augmented system is defective
/// (a single 4-chain), so the similarity transform is intrinsically fragile;
/// an ill-conditioned basis is reported as an error rather than silently
/// degrading.
pub fn jordan_crosscheck<T: Real>(system: &LateralSystem<T>, t: T) -> Result<T> {
    if system.kind != ModelKind::Dynamic {
        return Err(Error::Unsupported { model: system.kind.tag(), what: "jordan cross-check" });
    }
    let n = system.dim() + 1;
    let mut aug = DMatrix::<T>::zeros(n, n);
    aug.view_mut((0, 0), (n - 1, n - 1)).copy_from(&system.a);
    aug.view_mut((0, n - 1), (n - 1, 1)).copy_from(&system.b);

    let scale = aug.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    let tol = scale * lit::<T>(1e-9);

    // Eigenvalues: four (numerical) zeros plus one complex-conjugate pair.
    let eigs = aug.complex_eigenvalues();
    let mut nonzero: Vec<Complex<T>> =
        eigs.iter().copied().filter(|l| l.modulus() > tol).collect();
    if nonzero.len() != 2 {
        return Err(Error::JordanDiagnostic(format!(
            "expected one nonzero conjugate pair, found {} nonzero eigenvalues",
            nonzero.len()
        )));
    }
    nonzero.sort_by(|a, b| b.im.partial_cmp(&a.im).unwrap_or(std::cmp::Ordering::Equal));
    let lam = nonzero[0];
    let lam_conj = nonzero[1];

    // Spectral projector onto the generalized nullspace: with only one other
    // (conjugate) eigenvalue pair, P0 = (A^2 - 2 Re(lam) A + |lam|^2 I) / |lam|^2.
    let norm2 = lam.modulus_squared();
    let re2 = lam.re + lam.re;
    let ident = DMatrix::<T>::identity(n, n);
    let proj = (&aug * &aug - &aug * re2 + &ident * norm2) / norm2;

    // Jordan chain for the zero eigenvalue: pick the projected basis vector
    // with the strongest fourth-order response and walk it down with A.
    let a3 = &aug * &aug * &aug;
    let mut best: Option<(T, DVector<T>)> = None;
    for i in 0..n {
        let cand = proj.column(i).into_owned();
        let response = (&a3 * &cand).norm();
        if best.as_ref().map_or(true, |(r, _)| response > *r) {
            best = Some((response, cand));
        }
    }
    let (response, v4) = best.expect("projector has columns");
    if response <= tol {
        return Err(Error::JordanDiagnostic("no length-4 chain found for the zero eigenvalue".into()));
    }
    let v4 = v4 / response; // normalizes the chain bottom to unit length
    let v3 = &aug * &v4;
    let v2 = &aug * &v3;
    let v1 = &aug * &v2;

    // Eigenvector of the complex eigenvalue from the nullspace of (A - lam I).
    let augc = aug.map(|v| Complex::new(v, T::zero()));
    let identc = DMatrix::<Complex<T>>::identity(n, n);
    let shifted = &augc - &identc * lam;
    let svd = shifted.svd(false, true);
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let w: DVector<Complex<T>> = v_t.row(n - 1).map(|c| c.conjugate()).transpose();
    let w_conj: DVector<Complex<T>> = w.map(|c| c.conjugate());

    let mut p = DMatrix::<Complex<T>>::zeros(n, n);
    for (col, chain) in [&v1, &v2, &v3, &v4].into_iter().enumerate() {
        for r in 0..n {
            p[(r, col)] = Complex::new(chain[r], T::zero());
        }
    }
    p.set_column(4, &w);
    p.set_column(5, &w_conj);

    // Condition check before trusting the similarity transform.
    let sv = p.clone().svd(false, false).singular_values;
    let (smax, smin) = (sv.max(), sv.min());
    if !(smin > T::zero()) || smax / smin > lit(1e12) {
        return Err(Error::JordanDiagnostic(format!(
            "basis condition number {:?} too large",
            smax / smin
        )));
    }

    // exp(J t): polynomial block for the 4-chain, scalar exponentials for the pair.
    let zero = Complex::new(T::zero(), T::zero());
    let mut ejt = DMatrix::<Complex<T>>::from_element(n, n, zero);
    let two = lit::<T>(2.0);
    let six = lit::<T>(6.0);
    let powers = [T::one(), t, t * t / two, t * t * t / six];
    for r in 0..4 {
        for c in r..4 {
            ejt[(r, c)] = Complex::new(powers[c - r], T::zero());
        }
    }
    ejt[(4, 4)] = (lam * Complex::new(t, T::zero())).exp();
    ejt[(5, 5)] = (lam_conj * Complex::new(t, T::zero())).exp();

    let p_inv = p
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::JordanDiagnostic("basis not invertible".into()))?;
    let via_jordan = &p * ejt * p_inv;
    let direct = (aug * t).exp();

    let mut dev = T::zero();
    for r in 0..n {
        for c in 0..n {
            let d = (via_jordan[(r, c)] - Complex::new(direct[(r, c)], T::zero())).modulus();
            dev = dev.max(d);
        }
    }
    Ok(dev)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_system, ModelKind, VehicleParams};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn kmh(v: f64) -> f64 {
        v / 3.6
    }

    fn dm_at(vx_kmh: f64) -> LateralSystem<f64> {
        build_system(&VehicleParams::default(), ModelKind::Dynamic, kmh(vx_kmh)).unwrap()
    }

    #[test]
    fn brake_transition_identity_and_unit_time() {
        let t0 = brake_transition(0.0f64).unwrap();
        assert_eq!(t0.a_t, DMatrix::identity(3, 3));
        assert_eq!(t0.b_t, DVector::zeros(3));
        let t1 = brake_transition(1.0f64).unwrap();
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.5, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0]);
        assert_eq!(t1.a_t, a);
        assert_eq!(t1.b_t, DVector::from_column_slice(&[1.0 / 6.0, 0.5, 1.0]));
        assert!(brake_transition(-0.1f64).is_err());
    }

    #[test]
    fn brake_relative_speed_after_two_seconds() {
        let x0 = BrakeState { dx: -30.0, dv: 10.0, accel: 0.0 };
        let x = propagate_brake(&x0, -10.0, 2.0).unwrap();
        assert!((x.dv - (10.0 - 20.0)).abs() < 1e-12);
    }

    #[test]
    fn steer_transition_identity_at_zero() {
        let p = VehicleParams::<f64>::default();
        for kind in ModelKind::ALL {
            let sys = build_system(&p, kind, kmh(70.0)).unwrap();
            let tr = steer_transition(&sys, 0.0);
            assert!((tr.a_t - DMatrix::identity(sys.dim(), sys.dim())).abs().max() < 1e-15);
            assert!(tr.b_t.abs().max() < 1e-15);
        }
    }

    #[test]
    fn reduced_models_match_printed_transition_forms() {
        // SSCM and KM transition pairs have closed forms; the exponential
        // route must reproduce them to near machine precision.
        let p = VehicleParams::<f64>::default();
        for &(kind, vx, t) in &[
            (ModelKind::SteadyState, kmh(70.0), 1.37),
            (ModelKind::SteadyState, kmh(110.0), 3.9),
            (ModelKind::Kinematic, kmh(50.0), 2.2),
            (ModelKind::Kinematic, kmh(90.0), 0.4),
        ] {
            let sys = build_system(&p, kind, vx).unwrap();
            let tr = steer_transition(&sys, t);
            let (a02, a12, b0, b1) = match kind {
                ModelKind::SteadyState => {
                    let (p1, p2, p3, p4) = (sys.p[0], sys.p[1], sys.p[2], sys.p[3]);
                    let den = p2 + p4 * vx * vx;
                    (
                        (vx * vx * t * t + 2.0 * vx * t * (p1 - p3 * vx * vx)) / (2.0 * den),
                        vx * t / den,
                        (vx * vx * t.powi(3) + 3.0 * vx * t * t * (p1 - p3 * vx * vx)) / (6.0 * den),
                        vx * t * t / (2.0 * den),
                    )
                }
                ModelKind::Kinematic => {
                    let (p1, p2) = (sys.p[0], sys.p[1]);
                    (
                        vx * (p1 * t + p2 * vx * t * t / 2.0),
                        p2 * vx * t,
                        p2 * vx * vx * t.powi(3) / 6.0 + p1 * vx * t * t / 2.0,
                        p2 * vx * t * t / 2.0,
                    )
                }
                _ => unreachable!(),
            };
            let expected_a = DMatrix::from_row_slice(3, 3, &[
                1.0, vx * t, a02,
                0.0, 1.0, a12,
                0.0, 0.0, 1.0,
            ]);
            let expected_b = DVector::from_column_slice(&[b0, b1, t]);
            assert!((tr.a_t - expected_a).abs().max() < 1e-12 * (1.0 + vx * t));
            assert!((tr.b_t - expected_b).abs().max() < 1e-12 * (1.0 + vx * t));
        }
    }

    #[test]
    fn propagate_zero_state_zero_input() {
        let sys = dm_at(80.0);
        let x = propagate(&sys, &LateralState::zero(ModelKind::Dynamic), 0.0, 3.0).unwrap();
        assert!(x.as_vec().abs().max() < 1e-15);
    }

    #[test]
    fn propagate_rejects_mismatched_state() {
        let sys = dm_at(80.0);
        let wrong = LateralState::zero(ModelKind::Kinematic);
        assert!(propagate(&sys, &wrong, 0.0, 1.0).is_err());
    }

    #[test]
    fn semigroup_property_all_models() {
        let p = VehicleParams::<f64>::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let kind = ModelKind::ALL[rng.gen_range(0..4)];
            let vx = rng.gen_range(8.0..36.0);
            let sys = build_system(&p, kind, vx).unwrap();
            let x0 = LateralState::from_vec(
                kind,
                DVector::from_fn(kind.dim(), |_, _| rng.gen_range(-0.5..0.5)),
            )
            .unwrap();
            let u = rng.gen_range(-0.1..0.1);
            let t1 = rng.gen_range(0.0..2.5);
            let t2 = rng.gen_range(0.0..2.5);
            let two_step = propagate(&sys, &propagate(&sys, &x0, u, t1).unwrap(), u, t2).unwrap();
            let one_step = propagate(&sys, &x0, u, t1 + t2).unwrap();
            let scale = one_step.as_vec().abs().max().max(1.0);
            assert!(
                (two_step.as_vec() - one_step.as_vec()).abs().max() / scale < 1e-9,
                "semigroup violated for {kind:?}"
            );
        }
    }

    #[test]
    fn output_trivial_and_pmm() {
        let p = VehicleParams::<f64>::default();
        let sys = dm_at(80.0);
        let y = output(&sys, &LateralState::zero(ModelKind::Dynamic), 0.0).unwrap();
        assert_eq!(y, Vector3::new(0.0, 0.0, 0.0));
        assert_eq!(corner_position(&sys, &LateralState::zero(ModelKind::Dynamic)), -p.width / 2.0);

        let pmm = build_system(&p, ModelKind::PointMass, kmh(70.0)).unwrap();
        let x = LateralState::new(ModelKind::PointMass, &[0.0, 0.0, 3.0]).unwrap();
        let y = output(&pmm, &x, 1.0).unwrap();
        assert_eq!(y, Vector3::new(0.0, 3.0, 1.0));
    }

    #[test]
    fn propagator_cache_returns_same_pair() {
        let sys = dm_at(80.0);
        let prop = Propagator::new(&sys);
        let a = prop.transition(1.25);
        let b = prop.transition(1.25);
        assert_eq!(a, b);
        let x0 = LateralState::zero(ModelKind::Dynamic);
        let direct = propagate(&sys, &x0, 0.02, 1.25).unwrap();
        let cached = prop.state_at(&x0, 0.02, 1.25);
        assert_eq!(direct, cached);
    }

    #[test]
    fn jordan_crosscheck_identity_and_horizon() {
        let sys = dm_at(80.0);
        let at_zero = jordan_crosscheck(&sys, 0.0).unwrap();
        assert!(at_zero < 1e-10, "deviation at t=0 was {at_zero}");
        let at_two = jordan_crosscheck(&sys, 2.0).unwrap();
        assert!(at_two < 1e-8, "deviation at t=2 was {at_two}");
        let pmm = build_system(&VehicleParams::default(), ModelKind::PointMass, 20.0).unwrap();
        assert!(jordan_crosscheck(&pmm, 1.0).is_err());
    }

    #[test]
    fn augmented_dm_eigenstructure() {
        // Four zero eigenvalues plus a conjugate pair at -(p1+p5)/(2 v_x).
        let sys = dm_at(80.0);
        let vx = sys.v_x;
        let n = sys.dim() + 1;
        let mut aug = DMatrix::<f64>::zeros(n, n);
        aug.view_mut((0, 0), (n - 1, n - 1)).copy_from(&sys.a);
        aug.view_mut((0, n - 1), (n - 1, 1)).copy_from(&sys.b);
        let eigs = aug.complex_eigenvalues();
        let mut zero = 0;
        let mut pair = Vec::new();
        for l in eigs.iter() {
            if l.modulus() < 1e-7 {
                zero += 1;
            } else {
                pair.push(*l);
            }
        }
        assert_eq!(zero, 4);
        assert_eq!(pair.len(), 2);
        let expected_re = -(sys.p[0] + sys.p[4]) / (2.0 * vx);
        for l in pair {
            assert!((l.re - expected_re).abs() < 1e-9);
            assert!(l.im.abs() > 1.0, "pair should be genuinely complex");
        }
    }
}
