//! Steering boundary residual, its root finders and the avoid-by-steering
//! algorithms.
//!
//! The steering time is the largest root of the residual
//! `g(t) = y_FR(t) - y_lead - y_margin` under the evasive control model
//! (ramp at the rate limit, hold at the angle limit). Newton-Raphson and
//! Halley iterations run on exact derivatives assembled from the system
//! matrices; starting from a large initial time makes them converge onto the
//! largest root from the right, past any stationary points.

use crate::braking;
use crate::error::{Error, Result};
use crate::models::{build_system, steering_limits, LateralSystem, ModelKind, SteeringLimits};
use crate::models::longitudinal_closed_form;
use crate::num::{lit, Real};
use crate::propagate::{propagate, LateralState, Propagator};
use crate::scenario::Scenario;

/// Root-finder configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootConfig<T> {
    /// Initial guess (s); large by default so iterates approach the largest
    /// root from the right.
    pub t0: T,
    /// Stopping tolerance on the residual magnitude (m).
    pub tol: T,
    /// Damping factor in `(0, 1]`.
    pub step: T,
    pub max_iter: usize,
}

impl<T: Real> Default for RootConfig<T> {
    fn default() -> Self {
        Self { t0: lit(100.0), tol: lit(1e-6), step: T::one(), max_iter: 100 }
    }
}

impl<T: Real> RootConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.t0 > T::zero()) {
            return Err(Error::Domain("t0 must be positive".into()));
        }
        if !(self.tol > T::zero()) {
            return Err(Error::Domain("tol must be positive".into()));
        }
        if !(self.step > T::zero()) || self.step > T::one() {
            return Err(Error::Domain("step must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Which root-finding iteration to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverKind {
    Newton,
    #[default]
    Halley,
}

impl std::str::FromStr for SolverKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "newton" => Ok(SolverKind::Newton),
            "halley" => Ok(SolverKind::Halley),
            other => Err(Error::Domain(format!("unknown solver '{other}'"))),
        }
    }
}

/// Boundary-crossing problem: find `t` with `y_FR(t) = y_lead + y_margin`
/// under constant input `u`.
#[derive(Debug, Clone)]
pub struct BoundaryProblem<'a, T: Real> {
    pub system: &'a LateralSystem<T>,
    pub x0: LateralState<T>,
    /// Constant control input (rad/s for the steered models, m/s^3 for PMM).
    pub u: T,
    /// Lead rear-left corner lateral position (m).
    pub y_lead: T,
    /// Lateral safety margin (m).
    pub y_margin: T,
}

/// Converged root with the iteration count (number of residual evaluations
/// until the tolerance was met, the initial guess included).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootResult<T> {
    pub root: T,
    pub iterations: usize,
    /// Residual slope was numerically zero at convergence (double root).
    pub tangent: bool,
}

/// Rows `H_y C`, `H_y C A`, `H_y C A^2` and their input contractions,
/// precomputed once per solve. `H_y C` is speed-independent for every model.
struct ResidualRows<T> {
    corner: nalgebra::RowDVector<T>,
    corner_a: nalgebra::RowDVector<T>,
    corner_aa: nalgebra::RowDVector<T>,
    corner_b: T,
    corner_ab: T,
    offset: T,
}

impl<T: Real> ResidualRows<T> {
    fn new(problem: &BoundaryProblem<'_, T>) -> Self {
        let sys = problem.system;
        let corner = sys.corner_row();
        let corner_a = &corner * &sys.a;
        let corner_aa = &corner_a * &sys.a;
        let corner_b = (&corner * &sys.b)[0];
        let corner_ab = (&corner_a * &sys.b)[0];
        let offset = sys.half_width + problem.y_lead + problem.y_margin;
        Self { corner, corner_a, corner_aa, corner_b, corner_ab, offset }
    }

    fn g(&self, x: &LateralState<T>) -> T {
        (&self.corner * x.as_vec())[0] - self.offset
    }

    fn g_dot(&self, x: &LateralState<T>, u: T) -> T {
        (&self.corner_a * x.as_vec())[0] + self.corner_b * u
    }

    fn g_ddot(&self, x: &LateralState<T>, u: T) -> T {
        (&self.corner_aa * x.as_vec())[0] + self.corner_ab * u
    }
}

/// Residual `y_FR(t) - y_lead - y_margin` (m).
pub fn g_s<T: Real>(problem: &BoundaryProblem<'_, T>, t: T) -> Result<T> {
    let rows = ResidualRows::new(problem);
    let x = propagate(problem.system, &problem.x0, problem.u, t)?;
    Ok(rows.g(&x))
}

/// First time derivative of the residual (m/s), from the state equations.
pub fn g_s_dot<T: Real>(problem: &BoundaryProblem<'_, T>, t: T) -> Result<T> {
    let rows = ResidualRows::new(problem);
    let x = propagate(problem.system, &problem.x0, problem.u, t)?;
    Ok(rows.g_dot(&x, problem.u))
}

/// Second time derivative of the residual (m/s^2).
pub fn g_s_ddot<T: Real>(problem: &BoundaryProblem<'_, T>, t: T) -> Result<T> {
    let rows = ResidualRows::new(problem);
    let x = propagate(problem.system, &problem.x0, problem.u, t)?;
    Ok(rows.g_ddot(&x, problem.u))
}

fn solve_root<T: Real>(
    problem: &BoundaryProblem<'_, T>,
    config: &RootConfig<T>,
    solver: SolverKind,
) -> Result<RootResult<T>> {
    config.validate()?;
    let rows = ResidualRows::new(problem);
    let prop = Propagator::new(problem.system);
    let tangent_eps = lit::<T>(1e-12);
    let two = lit::<T>(2.0);
    let mut t = config.t0;
    for k in 1..=config.max_iter {
        let x = prop.state_at(&problem.x0, problem.u, t);
        let g = rows.g(&x);
        let gd = rows.g_dot(&x, problem.u);
        if g.abs() < config.tol {
            return Ok(RootResult { root: t, iterations: k, tangent: gd.abs() < tangent_eps });
        }
        let denom = match solver {
            SolverKind::Newton => gd,
            SolverKind::Halley => gd - g * rows.g_ddot(&x, problem.u) / (two * gd),
        };
        if denom == T::zero() || !denom.is_finite() {
            return Err(Error::SingularDerivative { at: t.to_f64().unwrap_or(f64::NAN) });
        }
        t -= config.step * g / denom;
        if !t.is_finite() {
            return Err(Error::NonConvergence { last: f64::NAN, iterations: k });
        }
    }
    Err(Error::NonConvergence {
        last: t.to_f64().unwrap_or(f64::NAN),
        iterations: config.max_iter,
    })
}

/// Newton-Raphson iteration on the boundary residual.
pub fn newton_raphson<T: Real>(
    problem: &BoundaryProblem<'_, T>,
    config: &RootConfig<T>,
) -> Result<RootResult<T>> {
    solve_root(problem, config, SolverKind::Newton)
}

/// Halley iteration on the boundary residual; cubic local convergence at one
/// extra matrix-vector product per step.
pub fn halley<T: Real>(
    problem: &BoundaryProblem<'_, T>,
    config: &RootConfig<T>,
) -> Result<RootResult<T>> {
    solve_root(problem, config, SolverKind::Halley)
}

/// Timed phases of the evasive manoeuvre.
#[derive(Debug, Clone, PartialEq)]
pub struct SteerPlan<T> {
    /// Total steering time until the corner reaches the safety line (s).
    pub t_s: T,
    /// Ramp-only crossing time (s).
    pub t_sj: T,
    /// Time at which the saturation limit is reached (s).
    pub t_sa: T,
    /// State at the phase switch, present only for two-phase manoeuvres.
    pub switch_state: Option<LateralState<T>>,
    /// State at `t_s`.
    pub final_state: LateralState<T>,
    /// Total root-finder iterations across both phases.
    pub iterations: usize,
}

impl<T: Real> SteerPlan<T> {
    pub fn single_phase(&self) -> bool {
        self.switch_state.is_none()
    }
}

/// Either the manoeuvre phases, or the certificate that none is needed.
#[derive(Debug, Clone, PartialEq)]
pub enum ManeuverPlan<T> {
    /// The ramp-only crossing time is nonpositive: the corner is already
    /// past the safety line under the evasive control model.
    NoRisk { t_sj: T },
    Plan(SteerPlan<T>),
}

/// Computes the steering time and phase structure for one model.
///
/// Runs the root finder with the rate limit as input; if the saturation time
/// arrives first, switches to the held-limit phase and solves again from the
/// switch state with zero input.
pub fn steering_time<T: Real>(
    system: &LateralSystem<T>,
    x0: &LateralState<T>,
    y_lead: T,
    y_margin: T,
    limits: &SteeringLimits<T>,
    config: &RootConfig<T>,
    solver: SolverKind,
) -> Result<ManeuverPlan<T>> {
    let mut t_sa = (limits.angle_max - x0.saturating_state()) / limits.rate_max;
    if t_sa < T::zero() {
        // Already beyond the limit: hold the current value from the start.
        t_sa = T::zero();
    }
    let ramp = BoundaryProblem { system, x0: x0.clone(), u: limits.rate_max, y_lead, y_margin };
    let first = solve_root(&ramp, config, solver)?;
    let t_sj = first.root;
    if t_sj <= T::zero() {
        return Ok(ManeuverPlan::NoRisk { t_sj });
    }
    if t_sa >= t_sj {
        let final_state = propagate(system, x0, limits.rate_max, t_sj)?;
        return Ok(ManeuverPlan::Plan(SteerPlan {
            t_s: t_sj,
            t_sj,
            t_sa,
            switch_state: None,
            final_state,
            iterations: first.iterations,
        }));
    }
    let switch_state = propagate(system, x0, limits.rate_max, t_sa)?;
    let hold = BoundaryProblem {
        system,
        x0: switch_state.clone(),
        u: T::zero(),
        y_lead,
        y_margin,
    };
    let second = solve_root(&hold, config, solver)?;
    let final_state = propagate(system, &switch_state, T::zero(), second.root)?;
    Ok(ManeuverPlan::Plan(SteerPlan {
        t_s: t_sa + second.root,
        t_sj,
        t_sa,
        switch_state: Some(switch_state),
        final_state,
        iterations: first.iterations + second.iterations,
    }))
}

/// Which avoid-by-steering formulation produced an outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SteeringAlgorithm {
    /// Backward reachability with numerically integrated (DM) or closed-form
    /// longitudinal distance.
    BackwardIntegrated,
    /// Backward reachability with the linear longitudinal approximation.
    BackwardSimplified,
    /// Forward simulation without root finding.
    Forward,
}

impl std::fmt::Display for SteeringAlgorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SteeringAlgorithm::BackwardIntegrated => "backward-integrated",
            SteeringAlgorithm::BackwardSimplified => "backward-simplified",
            SteeringAlgorithm::Forward => "forward",
        })
    }
}

/// Result of one avoid-by-steering evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct SteerOutcome<T> {
    pub t_s: T,
    pub t_sj: T,
    pub t_sa: T,
    pub final_state: LateralState<T>,
    /// Relative longitudinal distance at `t_s` under the algorithm's contact
    /// model (m; negative keeps the ego behind the lead).
    pub dx_s: T,
    pub avoidable: bool,
    pub iterations: usize,
    pub algorithm: SteeringAlgorithm,
}

/// Outcome of the steering check for a scenario.
#[derive(Debug, Clone, PartialEq)]
pub enum SteeringDecision<T> {
    /// No intervention needed under the steering control model.
    NoRisk { t_sj: T },
    Outcome(SteerOutcome<T>),
}

/// Solver and integration knobs for the steering algorithms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteerConfig<T> {
    pub root: RootConfig<T>,
    pub solver: SolverKind,
    /// Trapezoidal sampling interval for the DM longitudinal integral (s).
    pub dt_integration: T,
}

impl<T: Real> Default for SteerConfig<T> {
    fn default() -> Self {
        Self { root: RootConfig::default(), solver: SolverKind::default(), dt_integration: lit(0.01) }
    }
}

/// Longitudinal drift `x_s(t_s) - x_s(0)` along the manoeuvre by trapezoidal
/// integration of `x' = v_x - v_s psi`, phase-split at the saturation time.
pub fn longitudinal_drift_trapezoid<T: Real>(
    system: &LateralSystem<T>,
    x0: &LateralState<T>,
    plan: &SteerPlan<T>,
    rate_max: T,
    dt: T,
) -> Result<T> {
    if !(dt > T::zero()) {
        return Err(Error::Domain("integration step must be positive".into()));
    }
    let mut phases: Vec<(LateralState<T>, T, T)> = Vec::with_capacity(2);
    match &plan.switch_state {
        None => phases.push((x0.clone(), rate_max, plan.t_s)),
        Some(switch) => {
            phases.push((x0.clone(), rate_max, plan.t_sa));
            phases.push((switch.clone(), T::zero(), plan.t_s - plan.t_sa));
        }
    }
    let v_x = system.v_x;
    let kind = system.kind;
    let vs_gain = match kind {
        ModelKind::SteadyState => {
            let (p1, p2, p3, p4) = (system.p[0], system.p[1], system.p[2], system.p[3]);
            let vx2 = v_x * v_x;
            (p1 - p3 * vx2) / (p2 + p4 * vx2) * v_x
        }
        ModelKind::Kinematic => system.p[0] * v_x,
        _ => T::zero(),
    };
    let integrand = |v: &nalgebra::DVector<T>| {
        let (vs, psi) = match kind {
            ModelKind::Dynamic => (v[2], v[1]),
            ModelKind::PointMass => (v[1], T::zero()),
            ModelKind::SteadyState | ModelKind::Kinematic => (vs_gain * v[2], v[1]),
        };
        v_x - vs * psi
    };
    let mut drift = T::zero();
    let half = lit::<T>(0.5);
    for (start, u, horizon) in phases {
        if horizon <= T::zero() {
            continue;
        }
        let step_pair = crate::propagate::steer_transition(system, dt);
        let mut x = start.as_vec().clone();
        let mut f_prev = integrand(&x);
        let mut elapsed = T::zero();
        loop {
            let remaining = horizon - elapsed;
            if remaining <= dt * lit(1e-9) {
                break;
            }
            if remaining < dt {
                let pair = crate::propagate::steer_transition(system, remaining);
                let xn = &pair.a_t * &x + &pair.b_t * u;
                let f = integrand(&xn);
                drift += half * (f_prev + f) * remaining;
                break;
            }
            let xn = &step_pair.a_t * &x + &step_pair.b_t * u;
            let f = integrand(&xn);
            drift += half * (f_prev + f) * dt;
            x = xn;
            f_prev = f;
            elapsed += dt;
        }
    }
    Ok(drift)
}

fn prepared<T: Real>(
    scenario: &Scenario<T>,
    kind: ModelKind,
) -> Result<(LateralSystem<T>, SteeringLimits<T>, LateralState<T>)> {
    scenario.validate()?;
    let system = build_system(&scenario.params, kind, scenario.v_x)?;
    let limits =
        steering_limits(&scenario.params, &scenario.comfort, scenario.mu, scenario.v_x, kind)?;
    let x0 = scenario.initial_state(kind);
    Ok((system, limits, x0))
}

/// Backward-reachability steering check with the full longitudinal model
/// (trapezoidal integration for the DM, closed forms otherwise).
pub fn avoid_by_steering_backward<T: Real>(
    scenario: &Scenario<T>,
    kind: ModelKind,
    cfg: &SteerConfig<T>,
) -> Result<SteeringDecision<T>> {
    let (system, limits, x0) = prepared(scenario, kind)?;
    let plan = match steering_time(
        &system,
        &x0,
        scenario.y_lead,
        scenario.y_margin,
        &limits,
        &cfg.root,
        cfg.solver,
    )? {
        ManeuverPlan::NoRisk { t_sj } => return Ok(SteeringDecision::NoRisk { t_sj }),
        ManeuverPlan::Plan(p) => p,
    };
    let drift = match kind {
        ModelKind::Dynamic => {
            longitudinal_drift_trapezoid(&system, &x0, &plan, limits.rate_max, cfg.dt_integration)?
        }
        _ => longitudinal_closed_form(&system, &x0, plan.t_s, plan.t_sa, &limits, T::zero())?,
    };
    let half_w = system.half_width;
    let dx0 = scenario.params.front_bumper + half_w * x0.heading() - scenario.x_lead;
    let dx_s = dx0 + drift + half_w * (plan.final_state.heading() - x0.heading())
        - scenario.v_lead * plan.t_s;
    let avoidable = -dx_s >= scenario.x_margin;
    Ok(SteeringDecision::Outcome(SteerOutcome {
        t_s: plan.t_s,
        t_sj: plan.t_sj,
        t_sa: plan.t_sa,
        final_state: plan.final_state,
        dx_s,
        avoidable,
        iterations: plan.iterations,
        algorithm: SteeringAlgorithm::BackwardIntegrated,
    }))
}

/// Backward-reachability steering check with the linear longitudinal
/// approximation `x_s(t_s) = x(0) + v_x t_s` (bumper-plane contact model).
pub fn avoid_by_steering_simplified<T: Real>(
    scenario: &Scenario<T>,
    kind: ModelKind,
    cfg: &SteerConfig<T>,
) -> Result<SteeringDecision<T>> {
    let (system, limits, x0) = prepared(scenario, kind)?;
    let plan = match steering_time(
        &system,
        &x0,
        scenario.y_lead,
        scenario.y_margin,
        &limits,
        &cfg.root,
        cfg.solver,
    )? {
        ManeuverPlan::NoRisk { t_sj } => return Ok(SteeringDecision::NoRisk { t_sj }),
        ManeuverPlan::Plan(p) => p,
    };
    let dx_s = scenario.params.front_bumper - scenario.x_lead
        + (scenario.v_x - scenario.v_lead) * plan.t_s;
    let avoidable = -dx_s >= scenario.x_margin;
    Ok(SteeringDecision::Outcome(SteerOutcome {
        t_s: plan.t_s,
        t_sj: plan.t_sj,
        t_sa: plan.t_sa,
        final_state: plan.final_state,
        dx_s,
        avoidable,
        iterations: plan.iterations,
        algorithm: SteeringAlgorithm::BackwardSimplified,
    }))
}

/// Forward-simulation steering check: the contact time follows from the
/// relative speed alone, and only the lateral clearance at that time is
/// examined. No root finding.
pub fn avoid_by_steering_forward<T: Real>(
    scenario: &Scenario<T>,
    kind: ModelKind,
    cfg: &SteerConfig<T>,
) -> Result<SteeringDecision<T>> {
    let _ = cfg;
    let (system, limits, x0) = prepared(scenario, kind)?;
    let closing = scenario.v_x - scenario.v_lead;
    let t_s = (-scenario.x_margin + scenario.x_lead - scenario.params.front_bumper) / closing;
    if t_s <= T::zero() {
        // Already inside the margin; steering now cannot help.
        return Ok(SteeringDecision::Outcome(SteerOutcome {
            t_s: T::zero(),
            t_sj: T::zero(),
            t_sa: T::zero(),
            final_state: x0,
            dx_s: -scenario.x_margin,
            avoidable: false,
            iterations: 0,
            algorithm: SteeringAlgorithm::Forward,
        }));
    }
    let mut t_sa = (limits.angle_max - x0.saturating_state()) / limits.rate_max;
    if t_sa < T::zero() {
        t_sa = T::zero();
    }
    let final_state = if t_sa >= t_s {
        propagate(&system, &x0, limits.rate_max, t_s)?
    } else {
        let switch = propagate(&system, &x0, limits.rate_max, t_sa)?;
        propagate(&system, &switch, T::zero(), t_s - t_sa)?
    };
    let corner = crate::propagate::corner_position(&system, &final_state);
    let avoidable = corner >= scenario.y_lead + scenario.y_margin;
    Ok(SteeringDecision::Outcome(SteerOutcome {
        t_s,
        t_sj: t_s,
        t_sa,
        final_state,
        dx_s: -scenario.x_margin,
        avoidable,
        iterations: 0,
        algorithm: SteeringAlgorithm::Forward,
    }))
}

/// Convenience dispatcher over the three steering algorithms.
pub fn avoid_by_steering<T: Real>(
    scenario: &Scenario<T>,
    kind: ModelKind,
    algorithm: SteeringAlgorithm,
    cfg: &SteerConfig<T>,
) -> Result<SteeringDecision<T>> {
    match algorithm {
        SteeringAlgorithm::BackwardIntegrated => avoid_by_steering_backward(scenario, kind, cfg),
        SteeringAlgorithm::BackwardSimplified => avoid_by_steering_simplified(scenario, kind, cfg),
        SteeringAlgorithm::Forward => avoid_by_steering_forward(scenario, kind, cfg),
    }
}

/// Whether the scenario can be escaped at all: braking first, steering as
/// the fallback, mirroring how a threat assessor combines the two checks.
pub fn conflict_escapable<T: Real>(
    scenario: &Scenario<T>,
    kind: ModelKind,
    algorithm: SteeringAlgorithm,
    cfg: &SteerConfig<T>,
) -> Result<bool> {
    match braking::avoid_by_braking(&scenario.brake_state(), &scenario.comfort, scenario.x_margin)?
    {
        braking::BrakeDecision::NotNeeded => return Ok(true),
        braking::BrakeDecision::Computed(o) if o.avoidable => return Ok(true),
        _ => {}
    }
    match avoid_by_steering(scenario, kind, algorithm, cfg)? {
        SteeringDecision::NoRisk { .. } => Ok(true),
        SteeringDecision::Outcome(o) => Ok(o.avoidable),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_system, ComfortBounds, VehicleParams};
    use crate::propagate::LateralInit;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn kmh(v: f64) -> f64 {
        v / 3.6
    }

    fn deg(d: f64) -> f64 {
        d.to_radians()
    }

    /// The perturbed-state problem with three boundary crossings: DM at
    /// 80 km/h, state [2.75 m, 2 deg, 0.5 m/s, 0 deg/s, -2 deg], ramp input
    /// at the comfort rate limit, safety line at 2 m.
    fn three_root_problem(
        system: &LateralSystem<f64>,
    ) -> (BoundaryProblem<'_, f64>, SteeringLimits<f64>) {
        let p = VehicleParams::<f64>::default();
        let comfort = ComfortBounds::<f64>::default();
        let limits = steering_limits(&p, &comfort, 1.0, system.v_x, ModelKind::Dynamic).unwrap();
        let x0 = LateralState::new(
            ModelKind::Dynamic,
            &[2.75, deg(2.0), 0.5, 0.0, deg(-2.0)],
        )
        .unwrap();
        let problem = BoundaryProblem {
            system,
            x0,
            u: limits.rate_max,
            y_lead: 2.0,
            y_margin: 0.0,
        };
        (problem, limits)
    }

    /// Sign changes of the residual on a dense grid, stepping the state with
    /// one fixed transition pair instead of re-evaluating the exponential.
    fn dense_sign_changes(problem: &BoundaryProblem<'_, f64>, t_max: f64, dt: f64) -> Vec<f64> {
        let rows = ResidualRows::new(problem);
        let pair = crate::propagate::steer_transition(problem.system, dt);
        let mut roots = Vec::new();
        let mut x = problem.x0.clone();
        let mut prev = rows.g(&x);
        let mut t = dt;
        while t <= t_max {
            let v = &pair.a_t * x.as_vec() + &pair.b_t * problem.u;
            x = LateralState::from_vec(problem.system.kind, v).unwrap();
            let cur = rows.g(&x);
            if (cur > 0.0) != (prev > 0.0) {
                roots.push(t);
            }
            prev = cur;
            t += dt;
        }
        roots
    }

    #[test]
    fn residual_is_constant_for_zero_state_and_threshold() {
        let p = VehicleParams::<f64>::default();
        let sys = build_system(&p, ModelKind::Dynamic, kmh(80.0)).unwrap();
        let problem = BoundaryProblem {
            system: &sys,
            x0: LateralState::zero(ModelKind::Dynamic),
            u: 0.0,
            y_lead: 0.0,
            y_margin: 0.0,
        };
        for t in [0.0, 0.7, 2.0, 10.0] {
            assert!((g_s(&problem, t).unwrap() + p.width / 2.0).abs() < 1e-12);
            assert!(g_s_dot(&problem, t).unwrap().abs() < 1e-12);
            assert!(g_s_ddot(&problem, t).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn three_root_structure_and_largest_root() {
        let sys = build_system(&VehicleParams::default(), ModelKind::Dynamic, kmh(80.0)).unwrap();
        let (problem, _) = three_root_problem(&sys);
        let roots = dense_sign_changes(&problem, 6.0, 1e-4);
        assert_eq!(roots.len(), 3, "expected three crossings, got {roots:?}");
        assert!((roots[2] - 2.144).abs() < 2e-3);

        let cfg = RootConfig::default();
        let newton = newton_raphson(&problem, &cfg).unwrap();
        let halley_r = halley(&problem, &cfg).unwrap();
        assert!((newton.root - 2.1442).abs() < 1e-3, "newton root {}", newton.root);
        assert!((halley_r.root - newton.root).abs() < 1e-6);
        // Iteration counts from the 100 s start; Halley's cubic steps save
        // roughly a third of them.
        assert!((14..=18).contains(&newton.iterations), "newton {}", newton.iterations);
        assert!((8..=12).contains(&halley_r.iterations), "halley {}", halley_r.iterations);
        assert!(halley_r.iterations < newton.iterations);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let p = VehicleParams::<f64>::default();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..30 {
            let kind = ModelKind::ALL[rng.gen_range(0..4)];
            let sys = build_system(&p, kind, rng.gen_range(10.0..35.0)).unwrap();
            let x0 = LateralState::from_vec(
                kind,
                nalgebra::DVector::from_fn(kind.dim(), |_, _| rng.gen_range(-0.3..0.3)),
            )
            .unwrap();
            let problem = BoundaryProblem {
                system: &sys,
                x0,
                u: rng.gen_range(-0.05..0.05),
                y_lead: rng.gen_range(0.0..4.0),
                y_margin: 0.0,
            };
            let t = rng.gen_range(0.1..4.0);
            let h = 1e-5;
            let fd1 = (g_s(&problem, t + h).unwrap() - g_s(&problem, t - h).unwrap()) / (2.0 * h);
            let d1 = g_s_dot(&problem, t).unwrap();
            let scale1 = d1.abs().max(1e-3);
            assert!((fd1 - d1).abs() / scale1 < 1e-6, "first derivative");
            let fd2 =
                (g_s_dot(&problem, t + h).unwrap() - g_s_dot(&problem, t - h).unwrap()) / (2.0 * h);
            let d2 = g_s_ddot(&problem, t).unwrap();
            let scale2 = d2.abs().max(1e-3);
            assert!((fd2 - d2).abs() / scale2 < 1e-6, "second derivative");
        }
    }

    #[test]
    fn newton_is_exact_on_affine_residuals() {
        // A PMM with only an initial lateral speed gives g(t) = y0 + v t - c.
        let p = VehicleParams::<f64>::default();
        let sys = build_system(&p, ModelKind::PointMass, kmh(70.0)).unwrap();
        let x0 = LateralState::new(ModelKind::PointMass, &[0.0, 1.0, 0.0]).unwrap();
        let problem = BoundaryProblem {
            system: &sys,
            x0,
            u: 0.0,
            y_lead: 3.0 - p.width / 2.0,
            y_margin: 0.0,
        };
        let cfg = RootConfig::default();
        let r = newton_raphson(&problem, &cfg).unwrap();
        assert!((r.root - 3.0).abs() < 1e-12);
        // One update step: converged on the second residual evaluation.
        assert_eq!(r.iterations, 2);
        assert!(!r.tangent);
    }

    #[test]
    fn solvers_agree_with_bisection_oracle() {
        let p = VehicleParams::<f64>::default();
        let comfort = ComfortBounds::<f64>::default();
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let mut checked = 0;
        while checked < 40 {
            let vx = rng.gen_range(kmh(40.0)..kmh(110.0));
            let sys = build_system(&p, ModelKind::Dynamic, vx).unwrap();
            let limits = steering_limits(&p, &comfort, 1.0, vx, ModelKind::Dynamic).unwrap();
            let x0 = LateralState::new(
                ModelKind::Dynamic,
                &[
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-0.05..0.05),
                    rng.gen_range(-0.5..0.5),
                    rng.gen_range(-0.1..0.1),
                    rng.gen_range(-0.04..0.04),
                ],
            )
            .unwrap();
            let problem = BoundaryProblem {
                system: &sys,
                x0,
                u: limits.rate_max,
                y_lead: rng.gen_range(1.0..4.0),
                y_margin: 0.0,
            };
            let roots = dense_sign_changes(&problem, 12.0, 1e-4);
            let Some(&largest) = roots.last() else { continue };
            checked += 1;
            let cfg = RootConfig::default();
            let n = newton_raphson(&problem, &cfg).unwrap();
            let h = halley(&problem, &cfg).unwrap();
            assert!((n.root - largest).abs() < 1e-3, "newton vs grid");
            assert!((h.root - largest).abs() < 1e-3, "halley vs grid");
            assert!((n.root - h.root).abs() < 1e-6);
            // Largest-root selection: no sign change beyond the root.
            let beyond = dense_sign_changes(&problem, 12.0, 1e-3)
                .into_iter()
                .filter(|r| *r > n.root + 1e-3)
                .count();
            assert_eq!(beyond, 0);
        }
    }

    #[test]
    fn halley_needs_no_more_iterations_than_newton() {
        let p = VehicleParams::<f64>::default();
        let comfort = ComfortBounds::<f64>::default();
        let mut rng = ChaCha8Rng::seed_from_u64(57);
        let mut wins = 0;
        let mut total = 0;
        while total < 200 {
            let kind = ModelKind::ALL[rng.gen_range(0..4)];
            let vx = rng.gen_range(kmh(40.0)..kmh(110.0));
            let sys = build_system(&p, kind, vx).unwrap();
            let limits = steering_limits(&p, &comfort, 1.0, vx, kind).unwrap();
            let mut x0 = LateralState::zero(kind);
            if kind == ModelKind::Dynamic {
                x0 = LateralState::new(
                    kind,
                    &[0.0, rng.gen_range(-0.03..0.03), rng.gen_range(-0.3..0.3), 0.0, 0.0],
                )
                .unwrap();
            }
            let problem = BoundaryProblem {
                system: &sys,
                x0,
                u: limits.rate_max,
                y_lead: rng.gen_range(0.5..4.0),
                y_margin: 0.0,
            };
            let cfg = RootConfig::default();
            let (Ok(n), Ok(h)) = (newton_raphson(&problem, &cfg), halley(&problem, &cfg)) else {
                continue;
            };
            if n.root <= 0.0 {
                continue;
            }
            total += 1;
            if h.iterations <= n.iterations {
                wins += 1;
            }
        }
        assert!(wins * 10 >= total * 9, "halley within newton's count on {wins}/{total}");
    }

    #[test]
    fn steering_time_no_risk_when_already_clear() {
        let scenario = Scenario::<f64>::default();
        let mut clear = scenario;
        clear.set_corner_offset(0.5);
        let out =
            avoid_by_steering_backward(&clear, ModelKind::Dynamic, &SteerConfig::default())
                .unwrap();
        assert!(matches!(out, SteeringDecision::NoRisk { .. }));
    }

    #[test]
    fn saturated_initial_angle_skips_the_ramp() {
        // delta(0) = angle_max: the whole manoeuvre is the held-angle phase.
        let p = VehicleParams::<f64>::default();
        let comfort = ComfortBounds::<f64>::default();
        let vx = kmh(70.0);
        let sys = build_system(&p, ModelKind::Dynamic, vx).unwrap();
        let limits = steering_limits(&p, &comfort, 1.0, vx, ModelKind::Dynamic).unwrap();
        let x0 = LateralState::new(
            ModelKind::Dynamic,
            &[0.0, 0.0, 0.0, 0.0, limits.angle_max],
        )
        .unwrap();
        let plan = match steering_time(
            &sys,
            &x0,
            2.0,
            0.0,
            &limits,
            &RootConfig::default(),
            SolverKind::Halley,
        )
        .unwrap()
        {
            ManeuverPlan::Plan(p) => p,
            other => panic!("unexpected {other:?}"),
        };
        assert_eq!(plan.t_sa, 0.0);
        assert!(!plan.single_phase());
        // Dense crossing search on the held-angle trajectory.
        let hold = BoundaryProblem { system: &sys, x0, u: 0.0, y_lead: 2.0, y_margin: 0.0 };
        let crossing = *dense_sign_changes(&hold, 10.0, 1e-4)
            .last()
            .expect("trajectory must cross");
        assert!((plan.t_s - crossing).abs() < 1e-3, "{} vs {crossing}", plan.t_s);
    }

    #[test]
    fn phase_switch_state_is_continuous() {
        let p = VehicleParams::<f64>::default();
        let comfort = ComfortBounds::<f64>::default();
        let vx = kmh(90.0);
        let sys = build_system(&p, ModelKind::Dynamic, vx).unwrap();
        let limits = steering_limits(&p, &comfort, 1.0, vx, ModelKind::Dynamic).unwrap();
        let x0 = LateralState::zero(ModelKind::Dynamic);
        let plan = match steering_time(
            &sys,
            &x0,
            3.7 + p.width / 2.0,
            0.0,
            &limits,
            &RootConfig::default(),
            SolverKind::Halley,
        )
        .unwrap()
        {
            ManeuverPlan::Plan(p) => p,
            other => panic!("unexpected {other:?}"),
        };
        let switch = plan.switch_state.expect("two-phase at full lane offset");
        let recomputed = propagate(&sys, &x0, limits.rate_max, plan.t_sa).unwrap();
        assert_eq!(switch, recomputed, "identical propagate call");
        assert!((g_s(&BoundaryProblem {
            system: &sys,
            x0: switch,
            u: 0.0,
            y_lead: 3.7 + p.width / 2.0,
            y_margin: 0.0,
        }, plan.t_s - plan.t_sa).unwrap()).abs() < 1e-6);
    }

    #[test]
    fn simplified_equals_backward_for_pmm() {
        let scenario = Scenario::<f64>::default();
        let cfg = SteerConfig::default();
        let a = avoid_by_steering_backward(&scenario, ModelKind::PointMass, &cfg).unwrap();
        let b = avoid_by_steering_simplified(&scenario, ModelKind::PointMass, &cfg).unwrap();
        match (a, b) {
            (SteeringDecision::Outcome(a), SteeringDecision::Outcome(b)) => {
                assert_eq!(a.t_s, b.t_s);
                assert!((a.dx_s - b.dx_s).abs() < 1e-12, "identical contact model for PMM");
                assert_eq!(a.avoidable, b.avoidable);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn forward_trivial_cases() {
        let mut scenario = Scenario::<f64>::default();
        scenario.set_bumper_gap(1e6);
        let out =
            avoid_by_steering_forward(&scenario, ModelKind::Dynamic, &SteerConfig::default())
                .unwrap();
        match out {
            SteeringDecision::Outcome(o) => assert!(o.avoidable),
            other => panic!("unexpected {other:?}"),
        }
        let mut inside = Scenario::<f64>::default();
        inside.set_bumper_gap(0.5);
        inside.x_margin = 1.0;
        let out = avoid_by_steering_forward(&inside, ModelKind::Dynamic, &SteerConfig::default())
            .unwrap();
        match out {
            SteeringDecision::Outcome(o) => {
                assert!(!o.avoidable);
                assert_eq!(o.t_s, 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn nonconvergence_is_reported() {
        // A residual with no root in reach: corner already far above and
        // climbing, limited iteration budget.
        let p = VehicleParams::<f64>::default();
        let sys = build_system(&p, ModelKind::PointMass, kmh(70.0)).unwrap();
        let x0 = LateralState::new(ModelKind::PointMass, &[10.0, 1.0, 0.0]).unwrap();
        let problem =
            BoundaryProblem { system: &sys, x0, u: 0.0, y_lead: 0.0, y_margin: 0.0 };
        let cfg = RootConfig { max_iter: 5, ..RootConfig::default() };
        match newton_raphson(&problem, &cfg) {
            Err(Error::NonConvergence { iterations, .. }) => assert_eq!(iterations, 5),
            // Affine residual: Newton jumps straight to the negative root.
            Ok(r) => assert!(r.root < 0.0),
            Err(e) => panic!("unexpected error {e}"),
        }
    }
}
