//! Timing harness for the steering algorithms.
//!
//! Per (model, algorithm) pair the cost is split into the steering-time
//! solve, the final state evaluation and the longitudinal integration, each
//! measured separately over many repetitions. Medians are reported (p95 as
//! the spread) because wall-clock minima and means are timer-noise magnets.
//! Runs single-threaded; the first `warmup` repetitions are discarded so
//! one-time setup cost does not skew the phase split.

use std::time::Instant;

use critzone::models::{build_system, steering_limits, longitudinal_closed_form};
use critzone::steering::{
    longitudinal_drift_trapezoid, newton_raphson, steering_time, BoundaryProblem, ManeuverPlan,
    halley,
};
use critzone::{
    LateralState, ModelKind, RootConfig, Scenario, SolverKind, SteeringAlgorithm,
};
use serde::Serialize;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PhaseStats {
    pub median_us: f64,
    pub p95_us: f64,
}

fn stats(mut samples: Vec<f64>) -> PhaseStats {
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median_us = samples[samples.len() / 2];
    let p95 = ((samples.len() as f64 * 0.95) as usize).min(samples.len() - 1);
    PhaseStats { median_us, p95_us: samples[p95] }
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchEntry {
    pub model: String,
    pub algorithm: String,
    pub solve: PhaseStats,
    pub state_eval: PhaseStats,
    pub integrate: PhaseStats,
    pub total: PhaseStats,
    /// Root-finder iterations of the last repetition (0 for the forward
    /// algorithm, which does not iterate).
    pub iterations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolverBench {
    pub newton_us: PhaseStats,
    pub halley_us: PhaseStats,
    pub newton_iterations: usize,
    pub halley_iterations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub warmup: usize,
    pub iterations: usize,
    pub entries: Vec<BenchEntry>,
    pub solver: SolverBench,
}

const ALGORITHMS: [SteeringAlgorithm; 3] = [
    SteeringAlgorithm::BackwardIntegrated,
    SteeringAlgorithm::BackwardSimplified,
    SteeringAlgorithm::Forward,
];

fn algorithm_tag(a: SteeringAlgorithm) -> &'static str {
    match a {
        SteeringAlgorithm::BackwardIntegrated => "alg2",
        SteeringAlgorithm::BackwardSimplified => "alg3",
        SteeringAlgorithm::Forward => "alg4",
    }
}

/// Deterministic low-discrepancy jitter in `[-0.05, 0.05]` derived from the
/// seed, so repeated calls do not all hit identical horizons.
fn jitter(seed: u64, i: usize) -> f64 {
    let mut x = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i as u64);
    x ^= x >> 33;
    x = x.wrapping_mul(0xFF51_AFD7_ED55_8CCD);
    x ^= x >> 33;
    (x as f64 / u64::MAX as f64 - 0.5) * 0.1
}

/// One timed repetition of (solve, state evaluation, integration) for a
/// model/algorithm pair.
fn run_once(
    scenario: &Scenario<f64>,
    kind: ModelKind,
    algorithm: SteeringAlgorithm,
    offset: f64,
    root: &RootConfig<f64>,
) -> anyhow::Result<(f64, f64, f64, usize)> {
    let system = build_system(&scenario.params, kind, scenario.v_x)?;
    let limits =
        steering_limits(&scenario.params, &scenario.comfort, scenario.mu, scenario.v_x, kind)?;
    let x0 = scenario.initial_state(kind);
    let y_lead = critzone::propagate::corner_position(&system, &x0) - offset;
    let closing = scenario.v_x - scenario.v_lead;

    // Phase 1: steering time.
    let t_solve = Instant::now();
    let (t_s, t_sa, iterations) = match algorithm {
        SteeringAlgorithm::Forward => {
            let gap = -offset * 6.0; // representative forward horizon
            let t_s = gap / closing;
            let mut t_sa = (limits.angle_max - x0.saturating_state()) / limits.rate_max;
            if t_sa < 0.0 {
                t_sa = 0.0;
            }
            (t_s, t_sa, 0)
        }
        _ => match steering_time(&system, &x0, y_lead, 0.0, &limits, root, SolverKind::Halley)? {
            ManeuverPlan::Plan(p) => (p.t_s, p.t_sa, p.iterations),
            ManeuverPlan::NoRisk { .. } => anyhow::bail!("bench scenario must carry risk"),
        },
    };
    let solve_us = t_solve.elapsed().as_secs_f64() * 1e6;

    // Phase 2: state evaluation at the phase boundaries.
    let t_state = Instant::now();
    let final_state = if t_sa >= t_s {
        critzone::propagate::propagate(&system, &x0, limits.rate_max, t_s)?
    } else {
        let switch = critzone::propagate::propagate(&system, &x0, limits.rate_max, t_sa)?;
        critzone::propagate::propagate(&system, &switch, 0.0, t_s - t_sa)?
    };
    let state_us = t_state.elapsed().as_secs_f64() * 1e6;

    // Phase 3: longitudinal distance.
    let t_int = Instant::now();
    let integrate_us = match algorithm {
        SteeringAlgorithm::BackwardIntegrated => {
            let plan = critzone::steering::SteerPlan {
                t_s,
                t_sj: t_s,
                t_sa,
                switch_state: (t_sa < t_s)
                    .then(|| {
                        critzone::propagate::propagate(&system, &x0, limits.rate_max, t_sa)
                    })
                    .transpose()?,
                final_state: final_state.clone(),
                iterations,
            };
            let drift = match kind {
                ModelKind::Dynamic => {
                    longitudinal_drift_trapezoid(&system, &x0, &plan, limits.rate_max, 0.01)?
                }
                _ => longitudinal_closed_form(&system, &x0, t_s, t_sa, &limits, 0.0)?,
            };
            std::hint::black_box(drift);
            t_int.elapsed().as_secs_f64() * 1e6
        }
        SteeringAlgorithm::BackwardSimplified => {
            std::hint::black_box(scenario.v_x * t_s);
            t_int.elapsed().as_secs_f64() * 1e6
        }
        SteeringAlgorithm::Forward => 0.0,
    };
    std::hint::black_box(&final_state);
    Ok((solve_us, state_us, integrate_us, iterations))
}

/// Benchmarks every model/algorithm pair plus the Newton-vs-Halley
/// comparison on the perturbed three-crossing problem.
pub fn run(warmup: usize, iterations: usize, seed: u64) -> anyhow::Result<BenchReport> {
    let mut scenario = Scenario::<f64>::default();
    scenario.v_x = 90.0 / 3.6;
    scenario.set_bumper_gap(40.0);
    scenario.set_corner_offset(-3.7);
    let root = RootConfig::default();

    let mut entries = Vec::new();
    for kind in ModelKind::ALL {
        for algorithm in ALGORITHMS {
            let mut solve = Vec::with_capacity(iterations);
            let mut state = Vec::with_capacity(iterations);
            let mut integrate = Vec::with_capacity(iterations);
            let mut total = Vec::with_capacity(iterations);
            let mut last_iters = 0;
            for i in 0..warmup + iterations {
                let offset = -3.7 + jitter(seed, i);
                let (s, st, int, it) = run_once(&scenario, kind, algorithm, offset, &root)?;
                if i >= warmup {
                    solve.push(s);
                    state.push(st);
                    integrate.push(int);
                    total.push(s + st + int);
                }
                last_iters = it;
            }
            entries.push(BenchEntry {
                model: kind.tag().to_string(),
                algorithm: algorithm_tag(algorithm).to_string(),
                solve: stats(solve),
                state_eval: stats(state),
                integrate: stats(integrate),
                total: stats(total),
                iterations: last_iters,
            });
        }
    }

    // Newton vs Halley on the perturbed problem with three crossings.
    let sys = build_system(&scenario.params, ModelKind::Dynamic, 80.0 / 3.6)?;
    let limits = steering_limits(
        &scenario.params,
        &scenario.comfort,
        scenario.mu,
        80.0 / 3.6,
        ModelKind::Dynamic,
    )?;
    let x0 = LateralState::new(
        ModelKind::Dynamic,
        &[2.75, 2f64.to_radians(), 0.5, 0.0, (-2f64).to_radians()],
    )?;
    let problem =
        BoundaryProblem { system: &sys, x0, u: limits.rate_max, y_lead: 2.0, y_margin: 0.0 };
    let mut newton_us = Vec::with_capacity(iterations);
    let mut halley_us = Vec::with_capacity(iterations);
    let mut newton_iterations = 0;
    let mut halley_iterations = 0;
    for i in 0..warmup + iterations {
        let t = Instant::now();
        let n = newton_raphson(&problem, &root)?;
        let n_us = t.elapsed().as_secs_f64() * 1e6;
        let t = Instant::now();
        let h = halley(&problem, &root)?;
        let h_us = t.elapsed().as_secs_f64() * 1e6;
        if i >= warmup {
            newton_us.push(n_us);
            halley_us.push(h_us);
        }
        newton_iterations = n.iterations;
        halley_iterations = h.iterations;
    }

    Ok(BenchReport {
        warmup,
        iterations,
        entries,
        solver: SolverBench {
            newton_us: stats(newton_us),
            halley_us: stats(halley_us),
            newton_iterations,
            halley_iterations,
        },
    })
}

impl BenchReport {
    /// Fixed-width table, one line per model/algorithm pair.
    pub fn table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<6} {:<6} {:>12} {:>12} {:>12} {:>12} {:>6}\n",
            "model", "alg", "solve [us]", "state [us]", "integ [us]", "total [us]", "iters"
        ));
        for e in &self.entries {
            out.push_str(&format!(
                "{:<6} {:<6} {:>12.2} {:>12.2} {:>12.2} {:>12.2} {:>6}\n",
                e.model,
                e.algorithm,
                e.solve.median_us,
                e.state_eval.median_us,
                e.integrate.median_us,
                e.total.median_us,
                e.iterations
            ));
        }
        out.push_str(&format!(
            "solver comparison: newton {:.2} us ({} iters), halley {:.2} us ({} iters)\n",
            self.solver.newton_us.median_us,
            self.solver.newton_iterations,
            self.solver.halley_us.median_us,
            self.solver.halley_iterations
        ));
        out
    }

    pub fn median_total(&self, model: &str, algorithm: &str) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.model == model && e.algorithm == algorithm)
            .map(|e| e.total.median_us)
    }
}
