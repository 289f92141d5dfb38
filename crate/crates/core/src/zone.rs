//! Critical-zone construction: per-offset steering boundaries plus the
//! model-independent braking boundary, with time-to-collision conversion and
//! zone comparison helpers.
//!
//! A zone sweep anchors each lateral offset at the model's own
//! front-right-corner position, so abstractions that carry fewer states are
//! insensitive to the initial conditions they cannot represent, exactly as
//! the underlying state vectors dictate.

use nalgebra::DVector;

use crate::braking::critical_brake_distance;
use crate::error::{Error, Result};
use crate::models::{build_system, steering_limits, LateralSystem, ModelKind, SteeringLimits};
use crate::models::longitudinal_closed_form;
use crate::num::{lit, Real};
use crate::propagate::{corner_position, steer_transition, LateralState};
use crate::scenario::Scenario;
use crate::steering::{
    steering_time, ManeuverPlan, RootConfig, SolverKind, SteerPlan, SteeringAlgorithm,
};

/// Knobs for a zone sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZoneConfig<T> {
    pub algorithm: SteeringAlgorithm,
    pub solver: SolverKind,
    pub root: RootConfig<T>,
    /// Sampling interval for longitudinal integration, lane-exit checks and
    /// recorded trajectories (s).
    pub dt_integration: T,
    /// Lane width used by the lane-exit exclusion rule (m).
    pub lane_width: T,
    /// Gap increment of the forward-search sweep (m).
    pub forward_step: T,
    /// Worker threads for the offset sweep.
    pub threads: usize,
    /// Record sampled trajectories for the included offsets.
    pub with_trajectories: bool,
}

impl<T: Real> Default for ZoneConfig<T> {
    fn default() -> Self {
        Self {
            algorithm: SteeringAlgorithm::BackwardIntegrated,
            solver: SolverKind::default(),
            root: RootConfig::default(),
            dt_integration: lit(0.01),
            lane_width: lit(3.7),
            forward_step: lit(0.2),
            threads: 1,
            with_trajectories: false,
        }
    }
}

/// Evenly spaced offsets from `min` to `max` inclusive.
pub fn offset_grid<T: Real>(min: T, max: T, step: T) -> Result<Vec<T>> {
    if !(step > T::zero()) || !(max > min) {
        return Err(Error::Domain("grid requires max > min and step > 0".into()));
    }
    let span = max - min;
    let n = (span / step).to_f64().unwrap_or(0.0).round() as usize;
    let mut grid = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let x = min + step * T::from_usize(i).expect("grid index");
        grid.push(if x > max { max } else { x });
    }
    Ok(grid)
}

/// Default sweep: 0.1 m spacing across a full lane.
pub fn default_grid<T: Real>() -> Vec<T> {
    offset_grid(lit(-3.7), T::zero(), lit(0.1)).expect("static bounds")
}

/// Ten uniformly placed offsets across a full lane.
pub fn coarse_grid<T: Real>() -> Vec<T> {
    let n = 10usize;
    let min = lit::<T>(-3.7);
    let step = -min / T::from_usize(n - 1).expect("n");
    (0..n).map(|i| min + step * T::from_usize(i).expect("i")).collect()
}

/// Sampled ego path during the evasive manoeuvre.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub t: Vec<T>,
    /// Longitudinal position relative to the start (m).
    pub x: Vec<T>,
    /// Lateral position of the reference point (m).
    pub y: Vec<T>,
    /// Heading angle (rad).
    pub heading: Vec<T>,
}

/// One solved offset of the steering boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryPoint<T> {
    /// Boundary longitudinal distance (m) on the zone axis.
    pub distance: T,
    /// Boundary time-to-collision (s); exactly `distance / (v_x - v_lead)`.
    pub ttc: T,
    /// Steering time of the boundary manoeuvre (s).
    pub t_s: T,
    /// Final heading angle (rad).
    pub final_heading: T,
    pub trajectory: Option<Trajectory<T>>,
}

/// Steering boundary per offset plus the braking boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct ZoneBoundary<T> {
    pub offsets: Vec<T>,
    /// Boundary distance per offset; `None` marks a lane-exit exclusion.
    pub steer_distance: Vec<Option<T>>,
    pub steer_ttc: Vec<Option<T>>,
    pub brake_distance: T,
    pub brake_ttc: T,
    pub trajectories: Option<Vec<Option<Trajectory<T>>>>,
}

/// Signed per-offset differences between two zones (`b` relative to `a`).
#[derive(Debug, Clone, PartialEq)]
pub struct ZoneComparison<T> {
    pub offsets: Vec<T>,
    pub distance_delta: Vec<Option<T>>,
    pub ttc_delta: Vec<Option<T>>,
    pub max_abs_distance: Option<T>,
    pub max_abs_ttc: Option<T>,
}

struct OffsetContext<'a, T: Real> {
    scenario: &'a Scenario<T>,
    kind: ModelKind,
    system: LateralSystem<T>,
    limits: SteeringLimits<T>,
    x0: LateralState<T>,
    corner0: T,
    cfg: &'a ZoneConfig<T>,
}

impl<'a, T: Real> OffsetContext<'a, T> {
    fn new(scenario: &'a Scenario<T>, kind: ModelKind, cfg: &'a ZoneConfig<T>) -> Result<Self> {
        scenario.validate()?;
        let system = build_system(&scenario.params, kind, scenario.v_x)?;
        let limits = steering_limits(
            &scenario.params,
            &scenario.comfort,
            scenario.mu,
            scenario.v_x,
            kind,
        )?;
        let x0 = scenario.initial_state(kind);
        let corner0 = corner_position(&system, &x0);
        Ok(Self { scenario, kind, system, limits, x0, corner0, cfg })
    }

    /// Walks the manoeuvre phases at the sampling interval, reporting each
    /// sample's time, state and incremental longitudinal drift.
    fn walk<F: FnMut(T, &DVector<T>, T)>(&self, plan: &SteerPlan<T>, mut visit: F) {
        let dt = self.cfg.dt_integration;
        let v_x = self.system.v_x;
        let sys = &self.system;
        let vs_gain = match self.kind {
            ModelKind::SteadyState => {
                let (p1, p2, p3, p4) = (sys.p[0], sys.p[1], sys.p[2], sys.p[3]);
                let vx2 = v_x * v_x;
                (p1 - p3 * vx2) / (p2 + p4 * vx2) * v_x
            }
            ModelKind::Kinematic => sys.p[0] * v_x,
            _ => T::zero(),
        };
        let integrand = |v: &DVector<T>| {
            let (vs, psi) = match self.kind {
                ModelKind::Dynamic => (v[2], v[1]),
                ModelKind::PointMass => (v[1], T::zero()),
                _ => (vs_gain * v[2], v[1]),
            };
            v_x - vs * psi
        };
        let mut phases: Vec<(DVector<T>, T, T)> = Vec::with_capacity(2);
        match &plan.switch_state {
            None => phases.push((self.x0.as_vec().clone(), self.limits.rate_max, plan.t_s)),
            Some(sw) => {
                phases.push((self.x0.as_vec().clone(), self.limits.rate_max, plan.t_sa));
                phases.push((sw.as_vec().clone(), T::zero(), plan.t_s - plan.t_sa));
            }
        }
        let half = lit::<T>(0.5);
        let mut t_base = T::zero();
        visit(T::zero(), &phases[0].0, T::zero());
        for (start, u, horizon) in phases {
            if horizon <= T::zero() {
                continue;
            }
            let pair = steer_transition(&self.system, dt);
            let mut x = start;
            let mut f_prev = integrand(&x);
            let mut elapsed = T::zero();
            loop {
                let remaining = horizon - elapsed;
                if remaining <= dt * lit(1e-9) {
                    break;
                }
                let (h, xn) = if remaining < dt {
                    let p = steer_transition(&self.system, remaining);
                    (remaining, &p.a_t * &x + &p.b_t * u)
                } else {
                    (dt, &pair.a_t * &x + &pair.b_t * u)
                };
                let f = integrand(&xn);
                let dd = half * (f_prev + f) * h;
                elapsed += h;
                visit(t_base + elapsed, &xn, dd);
                x = xn;
                f_prev = f;
            }
            t_base += horizon;
        }
    }

    /// Lane-exit test and optional trajectory recording over one plan.
    ///
    /// An offset is excluded when the vehicle does not fit the lane at the
    /// start (either right-side corner below the lane edge) or when the
    /// front-right corner dips below the lane edge at any sampled instant of
    /// the manoeuvre. The rear corner's transient swing while yawing toward
    /// the lead is part of every evasive trajectory and is not penalized.
    fn scan(&self, plan: &SteerPlan<T>, offset: T) -> (bool, T, Option<Trajectory<T>>) {
        let params = &self.scenario.params;
        let half_w = params.width / lit(2.0);
        let rear = params.length - params.front_bumper;
        let line = self.corner0 - offset;
        let floor = line - self.cfg.lane_width;
        let slack = lit::<T>(1e-9);
        let mut excluded = false;
        let mut at_start = true;
        let mut drift = T::zero();
        let mut traj = self.cfg.with_trajectories.then(|| Trajectory {
            t: Vec::new(),
            x: Vec::new(),
            y: Vec::new(),
            heading: Vec::new(),
        });
        self.walk(plan, |t, v, dd| {
            drift += dd;
            let (y, psi) = match self.kind {
                ModelKind::PointMass => (v[0], T::zero()),
                _ => (v[0], v[1]),
            };
            let front = y + params.front_bumper * psi - half_w;
            if front < floor - slack {
                excluded = true;
            }
            if at_start {
                at_start = false;
                let back = y - rear * psi - half_w;
                if back < floor - slack {
                    excluded = true;
                }
            }
            if let Some(tr) = traj.as_mut() {
                tr.t.push(t);
                tr.x.push(drift);
                tr.y.push(y);
                tr.heading.push(psi);
            }
        });
        (excluded, drift, traj)
    }

    fn solve_offset(&self, offset: T) -> Result<Option<BoundaryPoint<T>>> {
        let closing = self.scenario.v_x - self.scenario.v_lead;
        if self.cfg.algorithm == SteeringAlgorithm::Forward {
            return self.solve_offset_forward(offset, closing);
        }
        let y_lead_eff = self.corner0 - offset - self.scenario.y_margin;
        let plan = match steering_time(
            &self.system,
            &self.x0,
            y_lead_eff,
            self.scenario.y_margin,
            &self.limits,
            &self.cfg.root,
            self.cfg.solver,
        )? {
            ManeuverPlan::NoRisk { .. } => {
                return Ok(Some(BoundaryPoint {
                    distance: T::zero(),
                    ttc: T::zero(),
                    t_s: T::zero(),
                    final_heading: self.x0.heading(),
                    trajectory: None,
                }));
            }
            ManeuverPlan::Plan(p) => p,
        };
        let (excluded, sampled_drift, trajectory) = self.scan(&plan, offset);
        if excluded {
            return Ok(None);
        }
        let distance = match self.cfg.algorithm {
            SteeringAlgorithm::BackwardIntegrated => {
                let drift = match self.kind {
                    // The lane-exit scan already accumulated the trapezoid.
                    ModelKind::Dynamic => sampled_drift,
                    _ => longitudinal_closed_form(
                        &self.system,
                        &self.x0,
                        plan.t_s,
                        plan.t_sa,
                        &self.limits,
                        T::zero(),
                    )?,
                };
                let half_w = self.system.half_width;
                drift + half_w * (plan.final_state.heading() - self.x0.heading())
                    - self.scenario.v_lead * plan.t_s
            }
            SteeringAlgorithm::BackwardSimplified => closing * plan.t_s,
            SteeringAlgorithm::Forward => unreachable!("handled above"),
        };
        Ok(Some(BoundaryPoint {
            distance,
            ttc: distance / closing,
            t_s: plan.t_s,
            final_heading: plan.final_state.heading(),
            trajectory,
        }))
    }

    /// Forward-search boundary: grow the gap in fixed increments and report
    /// the first one the forward check clears.
    fn solve_offset_forward(&self, offset: T, closing: T) -> Result<Option<BoundaryPoint<T>>> {
        let line = self.corner0 - offset;
        let step = self.cfg.forward_step;
        let horizon_cap = self.cfg.root.t0;
        let mut distance = T::zero();
        loop {
            let t_s = distance / closing;
            if t_s > horizon_cap {
                return Err(Error::NonConvergence {
                    last: t_s.to_f64().unwrap_or(f64::NAN),
                    iterations: 0,
                });
            }
            let mut t_sa =
                (self.limits.angle_max - self.x0.saturating_state()) / self.limits.rate_max;
            if t_sa < T::zero() {
                t_sa = T::zero();
            }
            let plan = self.forward_plan(t_s, t_sa)?;
            let corner = corner_position(&self.system, &plan.final_state);
            if corner >= line {
                let (excluded, _, trajectory) = self.scan(&plan, offset);
                if excluded {
                    return Ok(None);
                }
                return Ok(Some(BoundaryPoint {
                    distance,
                    ttc: t_s,
                    t_s,
                    final_heading: plan.final_state.heading(),
                    trajectory,
                }));
            }
            distance += step;
        }
    }

    fn forward_plan(&self, t_s: T, t_sa: T) -> Result<SteerPlan<T>> {
        if t_sa >= t_s {
            let final_state =
                crate::propagate::propagate(&self.system, &self.x0, self.limits.rate_max, t_s)?;
            Ok(SteerPlan {
                t_s,
                t_sj: t_s,
                t_sa,
                switch_state: None,
                final_state,
                iterations: 0,
            })
        } else {
            let switch =
                crate::propagate::propagate(&self.system, &self.x0, self.limits.rate_max, t_sa)?;
            let final_state =
                crate::propagate::propagate(&self.system, &switch, T::zero(), t_s - t_sa)?;
            Ok(SteerPlan {
                t_s,
                t_sj: t_s,
                t_sa,
                switch_state: Some(switch),
                final_state,
                iterations: 0,
            })
        }
    }
}

/// Boundary longitudinal distance for one lateral offset, or `None` when the
/// manoeuvre leaves the lane.
pub fn steer_boundary_distance<T: Real>(
    scenario: &Scenario<T>,
    kind: ModelKind,
    algorithm: SteeringAlgorithm,
    offset: T,
    cfg: &ZoneConfig<T>,
) -> Result<Option<T>> {
    let cfg = ZoneConfig { algorithm, ..*cfg };
    let ctx = OffsetContext::new(scenario, kind, &cfg)?;
    Ok(ctx.solve_offset(offset)?.map(|p| p.distance))
}

/// Full boundary analysis for one offset.
pub fn boundary_point<T: Real>(
    scenario: &Scenario<T>,
    kind: ModelKind,
    algorithm: SteeringAlgorithm,
    offset: T,
    cfg: &ZoneConfig<T>,
) -> Result<Option<BoundaryPoint<T>>> {
    let cfg = ZoneConfig { algorithm, ..*cfg };
    let ctx = OffsetContext::new(scenario, kind, &cfg)?;
    ctx.solve_offset(offset)
}

/// Sweeps the offset grid into a critical-zone boundary.
///
/// Offsets are independent; with `threads > 1` they are solved on a worker
/// pool and reassembled by grid index, so the result does not depend on
/// completion order.
pub fn compute_zone<T: Real + Send + Sync>(
    scenario: &Scenario<T>,
    kind: ModelKind,
    grid: &[T],
    cfg: &ZoneConfig<T>,
) -> Result<ZoneBoundary<T>> {
    if grid.is_empty() {
        return Err(Error::Domain("offset grid is empty".into()));
    }
    for w in grid.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::Domain("offset grid must be strictly increasing".into()));
        }
    }
    let ctx = OffsetContext::new(scenario, kind, cfg)?;
    let n = grid.len();
    let mut points: Vec<Option<BoundaryPoint<T>>> = Vec::with_capacity(n);
    let workers = cfg.threads.max(1).min(n);
    if workers == 1 {
        for &offset in grid {
            points.push(ctx.solve_offset(offset)?);
        }
    } else {
        let mut slots: Vec<Option<Result<Option<BoundaryPoint<T>>>>> = (0..n).map(|_| None).collect();
        let next = std::sync::atomic::AtomicUsize::new(0);
        std::thread::scope(|scope| {
            let mut handles = Vec::with_capacity(workers);
            for _ in 0..workers {
                let next = &next;
                let ctx_ref = &ctx;
                handles.push(scope.spawn(move || {
                    let mut local = Vec::new();
                    loop {
                        let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                        if i >= n {
                            break;
                        }
                        local.push((i, ctx_ref.solve_offset(grid[i])));
                    }
                    local
                }));
            }
            for h in handles {
                for (i, r) in h.join().expect("zone worker panicked") {
                    slots[i] = Some(r);
                }
            }
        });
        for slot in slots {
            points.push(slot.expect("all offsets solved")?);
        }
    }

    let closing = scenario.v_x - scenario.v_lead;
    let (brake_distance, _t_b) =
        critical_brake_distance(closing, scenario.brake_accel0, &scenario.comfort)?;
    let brake_ttc = brake_distance / closing;

    let mut steer_distance = Vec::with_capacity(n);
    let mut steer_ttc = Vec::with_capacity(n);
    let mut trajectories = cfg.with_trajectories.then(|| Vec::with_capacity(n));
    for p in points {
        match p {
            Some(bp) => {
                steer_distance.push(Some(bp.distance));
                steer_ttc.push(Some(bp.ttc));
                if let Some(ts) = trajectories.as_mut() {
                    ts.push(bp.trajectory);
                }
            }
            None => {
                steer_distance.push(None);
                steer_ttc.push(None);
                if let Some(ts) = trajectories.as_mut() {
                    ts.push(None);
                }
            }
        }
    }
    Ok(ZoneBoundary {
        offsets: grid.to_vec(),
        steer_distance,
        steer_ttc,
        brake_distance,
        brake_ttc,
        trajectories,
    })
}

/// Element-wise zone differences (`b` relative to `a`), with maxima over the
/// offsets both zones include.
pub fn compare_zones<T: Real>(a: &ZoneBoundary<T>, b: &ZoneBoundary<T>) -> Result<ZoneComparison<T>> {
    if a.offsets.len() != b.offsets.len()
        || a.offsets.iter().zip(&b.offsets).any(|(x, y)| x != y)
    {
        return Err(Error::GridMismatch(format!(
            "{} vs {} offsets",
            a.offsets.len(),
            b.offsets.len()
        )));
    }
    let mut distance_delta = Vec::with_capacity(a.offsets.len());
    let mut ttc_delta = Vec::with_capacity(a.offsets.len());
    let mut max_d: Option<T> = None;
    let mut max_t: Option<T> = None;
    for i in 0..a.offsets.len() {
        let dd = match (a.steer_distance[i], b.steer_distance[i]) {
            (Some(x), Some(y)) => Some(y - x),
            _ => None,
        };
        let dt = match (a.steer_ttc[i], b.steer_ttc[i]) {
            (Some(x), Some(y)) => Some(y - x),
            _ => None,
        };
        if let Some(v) = dd {
            max_d = Some(max_d.map_or(v.abs(), |m: T| m.max(v.abs())));
        }
        if let Some(v) = dt {
            max_t = Some(max_t.map_or(v.abs(), |m: T| m.max(v.abs())));
        }
        distance_delta.push(dd);
        ttc_delta.push(dt);
    }
    Ok(ZoneComparison {
        offsets: a.offsets.clone(),
        distance_delta,
        ttc_delta,
        max_abs_distance: max_d,
        max_abs_ttc: max_t,
    })
}
