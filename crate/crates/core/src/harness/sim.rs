//! Closed-loop co-simulation of the plant with the longitudinal and lateral
//! controllers.
//!
//! Rates: plant integration every 1 ms, PID and trace every 10 ms, and
//! estimator, model adaptation and MPC every `T_s` (100 ms by default).

use std::time::Instant;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::scenario::Scenario;
use crate::envelope::{steer_limit, v_max, EnvelopeConfig, RoadPoint};
use crate::error::{Error, Result};
use crate::lpv::{adapt, LateralState, SchedulingVector, SPEED_FLOOR};
use crate::mpc::{CostMode, LateralMpc};
use crate::pid::{PidConfig, PidController, PidGains, ThrottleBrakeSwitch};
use crate::plant::{DriveInput, PlantState};
use crate::rls::RlsEstimator;
use crate::scalar::wrap_angle;

pub const CONTROL_PERIOD: f64 = 0.01;
pub const PLANT_STEP: f64 = 0.001;
/// Lateral error beyond which a run is aborted [m].
pub const MAX_LATERAL_ERROR: f64 = 100.0;
/// Speed beyond which a run is aborted [m/s].
pub const MAX_SPEED: f64 = 60.0;
/// RNG stream reserved for measurement noise.
const NOISE_STREAM: u64 = 1;
/// Slack on limit checks against round-off.
const LIMIT_TOL: f64 = 1e-12;
/// Speed overshoot tolerated against the curvature limit [m/s].
const SPEED_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Overrides the scenario's cost mode.
    pub cost_mode: Option<CostMode>,
    /// Overrides the scenario's PID gains.
    pub gains: Option<PidGains<f64>>,
    /// Record wall-clock QP solve time. Off by default so that traces are
    /// reproducible byte for byte.
    pub timing: bool,
}

/// One row per control period, in CSV column order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: f64,
    pub v_ref: f64,
    pub v: f64,
    pub throttle: f64,
    pub brake: f64,
    pub delta_f: f64,
    pub y_ref: f64,
    pub y: f64,
    pub psi_ref: f64,
    pub psi: f64,
    pub cf_hat: f64,
    pub cr_hat: f64,
    pub wind_speed: f64,
    pub wind_heading: f64,
    pub mpc_cost: f64,
    pub mpc_slack: f64,
    pub solve_ms: f64,
}

/// What the lateral loop used at one MPC instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LateralSample {
    pub t: f64,
    /// Global position along the x axis [m].
    pub x: f64,
    /// Vehicle speed and estimator output at this instant.
    pub v_x: f64,
    pub estimate: [f64; 2],
    /// Scheduling point of the model handed to the MPC.
    pub scheduled_v_x: f64,
    pub scheduled_cf: f64,
    pub scheduled_cr: f64,
    pub command: f64,
    pub steer_limit: f64,
    pub fallback: bool,
    pub active_constraints: usize,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Summary {
    pub speed_mse: f64,
    pub position_mse: f64,
    pub heading_mse: f64,
    pub max_lateral_error: f64,
    /// Issued steering outside the amplitude, rate or envelope limits, plus
    /// control periods driven faster than the curvature limit.
    pub constraint_violations: usize,
    pub fallbacks: usize,
    pub mpc_steps: usize,
    pub aborted: bool,
}

impl Summary {
    /// Tracking metrics over a trace. Position error is `y - y_ref` and
    /// heading error `wrap(psi - psi_ref)`.
    pub fn from_trace(trace: &[TraceRow]) -> Self {
        let n = trace.len().max(1) as f64;
        let mut s = Summary::default();
        for r in trace {
            s.speed_mse += (r.v_ref - r.v).powi(2);
            let e = r.y - r.y_ref;
            s.position_mse += e * e;
            s.heading_mse += wrap_angle(r.psi - r.psi_ref).powi(2);
            s.max_lateral_error = s.max_lateral_error.max(e.abs());
        }
        s.speed_mse /= n;
        s.position_mse /= n;
        s.heading_mse /= n;
        s
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioResult {
    pub name: String,
    pub mode: CostMode,
    pub gains: PidGains<f64>,
    pub trace: Vec<TraceRow>,
    pub lateral: Vec<LateralSample>,
    pub summary: Summary,
    pub abort_reason: Option<String>,
}

pub fn run(scenario: &Scenario, opts: &RunOptions) -> Result<ScenarioResult> {
    scenario.validate()?;
    let plant = scenario.plant()?;
    let params = plant.params.clone();
    let path = scenario.reference_path()?;
    let mode = opts.cost_mode.unwrap_or(scenario.mpc.mode.into());
    let mpc_cfg = scenario.mpc.config(mode);
    let ts = mpc_cfg.ts;
    let n_p = mpc_cfg.n_p;
    let du_max = mpc_cfg.du_max;
    let envelope = EnvelopeConfig {
        u_max: mpc_cfg.u_max,
        ..EnvelopeConfig::default()
    };
    let gains = opts.gains.unwrap_or_else(|| scenario.gains());

    let lateral_every = (ts / CONTROL_PERIOD).round() as usize;
    if lateral_every == 0 || ((lateral_every as f64) * CONTROL_PERIOD - ts).abs() > 1e-9 {
        return Err(Error::Scenario(format!("T_s = {ts} is not a multiple of {CONTROL_PERIOD} s")));
    }
    let substeps = (CONTROL_PERIOD / PLANT_STEP).round() as usize;
    let n_steps = (scenario.duration / CONTROL_PERIOD).round() as usize;

    let mut pid = PidController::new(PidConfig::with_gains(gains));
    let mut switch = ThrottleBrakeSwitch::default();
    let mut rls = RlsEstimator::new(scenario.rls.config())?;
    let mut mpc = LateralMpc::new(mpc_cfg, params.clone())?;
    let bounds = scenario.rls.bounds;

    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    rng.set_stream(NOISE_STREAM);
    let force_noise = Normal::new(0.0, scenario.noise.force_sigma).map_err(|e| Error::Scenario(e.to_string()))?;
    let slip_noise = Normal::new(0.0, scenario.noise.slip_sigma).map_err(|e| Error::Scenario(e.to_string()))?;

    let mut state = PlantState::cruising(scenario.speed.at(0.0), &params);
    state.y = path.y(0.0);
    state.psi = path.heading(0.0);

    let mut steer = 0.0;
    let mut cost = f64::NAN;
    let mut slack = 0.0;
    let mut solve_ms = 0.0;
    let mut trace = Vec::with_capacity(n_steps);
    let mut lateral = Vec::with_capacity(n_steps / lateral_every + 1);
    let mut violations = 0;
    let mut fallbacks = 0;
    let mut abort_reason = None;

    for k in 0..n_steps {
        let t = k as f64 * CONTROL_PERIOD;
        state.time = t;

        if k % lateral_every == 0 {
            let truth = plant.tire_truth(&state, steer);
            let slips = [
                truth.front_slip + slip_noise.sample(&mut rng),
                truth.rear_slip + slip_noise.sample(&mut rng),
            ];
            let forces = [
                truth.front_force + force_noise.sample(&mut rng),
                truth.rear_force + force_noise.sample(&mut rng),
            ];
            if state.v_x >= SPEED_FLOOR {
                rls.update(forces, slips)?;
            }
            let estimate = rls.estimate();
            let v_sched = state.v_x.max(SPEED_FLOOR);
            let rho = SchedulingVector::new(v_sched, estimate[0], estimate[1], &bounds)?;
            let lti = adapt(rho, &params, ts)?;

            // local frame anchored at the reference point below the car
            let psi0 = path.heading(state.x);
            let (sin0, cos0) = psi0.sin_cos();
            let y0 = path.y(state.x);
            let local = LateralState::new(state.v_y, state.psi - psi0, state.psi_dot, cos0 * (state.y - y0));
            let s0 = path.station(state.x);
            let mut y_ref = DVector::zeros(2 * n_p);
            for j in 1..=n_p {
                let xj = path.x_at_station(s0 + state.v_x * ts * j as f64);
                y_ref[2 * (j - 1)] = -sin0 * (xj - state.x) + cos0 * (path.y(xj) - y0);
                y_ref[2 * (j - 1) + 1] = wrap_angle(path.heading(xj) - psi0);
            }

            let started = opts.timing.then(Instant::now);
            let out = mpc.step(&lti, &local, &y_ref, state.v_x)?;
            solve_ms = started.map_or(0.0, |s| s.elapsed().as_secs_f64() * 1e3);

            let limit = steer_limit(state.v_x, &params, &envelope);
            if out.command.abs() > limit + LIMIT_TOL || (out.command - steer).abs() > du_max + LIMIT_TOL {
                violations += 1;
            }
            if out.diagnostics.fallback {
                fallbacks += 1;
            }
            steer = out.command;
            cost = out.diagnostics.cost;
            slack = out.diagnostics.slack;
            lateral.push(LateralSample {
                t,
                x: state.x,
                v_x: state.v_x,
                estimate,
                scheduled_v_x: lti.rho.v_x,
                scheduled_cf: lti.rho.c_f,
                scheduled_cr: lti.rho.c_r(),
                command: steer,
                steer_limit: limit,
                fallback: out.diagnostics.fallback,
                active_constraints: out.diagnostics.active_set.len(),
                iterations: out.diagnostics.iterations,
            });
        }

        let bend = RoadPoint {
            station: 0.0,
            curvature: path.curvature(state.x),
            camber: scenario.road.camber,
            mu: scenario.road.mu,
        };
        if state.v_x > v_max(&bend)? + SPEED_TOL {
            violations += 1;
        }

        let v_ref = scenario.speed.at(t);
        let (throttle, brake) = switch.apply(pid.control(v_ref, state.v_x, CONTROL_PERIOD));
        let wind = plant.env.wind.at(t);
        let est = rls.estimate();
        trace.push(TraceRow {
            t,
            v_ref,
            v: state.v_x,
            throttle,
            brake,
            delta_f: steer,
            y_ref: path.y(state.x),
            y: state.y,
            psi_ref: path.heading(state.x),
            psi: state.psi,
            cf_hat: est[0],
            cr_hat: est[1],
            wind_speed: wind.speed,
            wind_heading: wind.heading,
            mpc_cost: cost,
            mpc_slack: slack,
            solve_ms,
        });

        let input = DriveInput { throttle, brake, steer };
        for _ in 0..substeps {
            match plant.step(&state, &input, PLANT_STEP) {
                Ok(next) => state = next,
                Err(e) => {
                    abort_reason = Some(format!("plant failure at t = {t:.2} s: {e}"));
                    break;
                }
            }
        }
        if abort_reason.is_none() {
            let err = state.y - path.y(state.x);
            if !err.is_finite() || err.abs() > MAX_LATERAL_ERROR {
                abort_reason = Some(format!("lateral error {err:.1} m at t = {t:.2} s"));
            } else if !state.v_x.is_finite() || state.v_x > MAX_SPEED {
                abort_reason = Some(format!("speed {:.1} m/s at t = {t:.2} s", state.v_x));
            }
        }
        if abort_reason.is_some() {
            break;
        }
    }

    let mut summary = Summary::from_trace(&trace);
    summary.constraint_violations = violations;
    summary.fallbacks = fallbacks;
    summary.mpc_steps = lateral.len();
    summary.aborted = abort_reason.is_some();
    Ok(ScenarioResult {
        name: scenario.name.clone(),
        mode,
        gains,
        trace,
        lateral,
        summary,
        abort_reason,
    })
}
