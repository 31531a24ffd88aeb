//! Longitudinal speed control: discrete PID, the throttle/brake switch, and a
//! closed-loop speed-tracking task used to score gain sets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plant::{DriveInput, Plant, PlantState};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidGains<T> {
    pub kp: T,
    pub ki: T,
    pub kd: T,
}

impl<T: Real> PidGains<T> {
    pub fn new(kp: T, ki: T, kd: T) -> Self {
        Self { kp, ki, kd }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PidConfig<T> {
    pub gains: PidGains<T>,
    /// Time constant of the first-order filter on the derivative term [s].
    pub derivative_filter: T,
    /// Bound on the error integral [m].
    pub integral_limit: T,
}

impl<T: Real> PidConfig<T> {
    pub fn with_gains(gains: PidGains<T>) -> Self {
        Self {
            gains,
            derivative_filter: T::of(0.05),
            integral_limit: T::of(50.0),
        }
    }
}

/// PID on the speed error with output in [-1, 1] (negative asks for brake).
///
/// Trapezoidal integration, filtered backward-difference derivative on the
/// error, and conditional integration: the integral is frozen while the output
/// is saturated in the direction the error pushes it.
#[derive(Debug, Clone)]
pub struct PidController<T> {
    config: PidConfig<T>,
    integral: T,
    prev_error: Option<T>,
    derivative: T,
}

impl<T: Real> PidController<T> {
    pub fn new(config: PidConfig<T>) -> Self {
        Self {
            config,
            integral: T::zero(),
            prev_error: None,
            derivative: T::zero(),
        }
    }

    pub fn gains(&self) -> PidGains<T> {
        self.config.gains
    }

    pub fn integral(&self) -> T {
        self.integral
    }

    pub fn reset(&mut self) {
        self.integral = T::zero();
        self.prev_error = None;
        self.derivative = T::zero();
    }

    /// One control update. `dt` must be positive; a non-positive `dt` only
    /// evaluates the proportional path and leaves the state untouched.
    pub fn control(&mut self, v_ref: T, v: T, dt: T) -> T {
        let g = self.config.gains;
        let e = v_ref - v;
        if !(dt > T::zero()) {
            return saturate(g.kp * e + g.ki * self.integral + g.kd * self.derivative);
        }
        let (raw_derivative, increment) = match self.prev_error {
            None => (T::zero(), e * dt),
            Some(prev) => ((e - prev) / dt, dt * (e + prev) / T::of(2.0)),
        };
        let tau = self.config.derivative_filter;
        self.derivative += (raw_derivative - self.derivative) * dt / (tau + dt);

        let limit = self.config.integral_limit;
        let candidate = (self.integral + increment).max(-limit).min(limit);
        let unsaturated = g.kp * e + g.ki * candidate + g.kd * self.derivative;
        let winding_up = unsaturated.abs() > T::one() && unsaturated * e > T::zero();
        let u = if winding_up {
            g.kp * e + g.ki * self.integral + g.kd * self.derivative
        } else {
            self.integral = candidate;
            unsaturated
        };
        self.prev_error = Some(e);
        saturate(u)
    }
}

fn saturate<T: Real>(u: T) -> T {
    if u.is_nan() {
        return T::zero();
    }
    u.max(-T::one()).min(T::one())
}

/// Hard sign switch: positive commands drive the motor, negative ones the
/// brake, never both.
pub fn switch_logic<T: Real>(command: T) -> (T, T) {
    if command >= T::zero() {
        (command.min(T::one()), T::zero())
    } else {
        (T::zero(), (-command).min(T::one()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PedalMode {
    Throttle,
    Brake,
}

/// Sign switch with a hysteresis band around zero: the active pedal only
/// changes once the command crosses the band on the other side.
#[derive(Debug, Clone)]
pub struct ThrottleBrakeSwitch<T> {
    band: T,
    mode: PedalMode,
}

impl<T: Real> Default for ThrottleBrakeSwitch<T> {
    fn default() -> Self {
        Self::new(T::of(0.02))
    }
}

impl<T: Real> ThrottleBrakeSwitch<T> {
    pub fn new(band: T) -> Self {
        Self {
            band: band.abs(),
            mode: PedalMode::Throttle,
        }
    }

    pub fn apply(&mut self, command: T) -> (T, T) {
        match self.mode {
            PedalMode::Throttle if command < -self.band => self.mode = PedalMode::Brake,
            PedalMode::Brake if command > self.band => self.mode = PedalMode::Throttle,
            _ => {}
        }
        let c = command.max(-T::one()).min(T::one());
        match self.mode {
            PedalMode::Throttle => (c.max(T::zero()), T::zero()),
            PedalMode::Brake => (T::zero(), (-c).max(T::zero())),
        }
    }
}

/// Reference speed over time: knots joined by smoothstep blends, held
/// constant outside the knot range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedProfile<T> {
    /// `(time [s], speed [m/s])`, strictly increasing in time.
    pub knots: Vec<(T, T)>,
}

impl<T: Real> SpeedProfile<T> {
    pub fn new(knots: Vec<(T, T)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::input("speed profile needs at least one knot"));
        }
        if knots.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::input("speed profile knot times must strictly increase"));
        }
        if knots.iter().any(|k| !(k.1 >= T::zero()) || !k.0.is_finite()) {
            return Err(Error::input("speed profile speeds must be non-negative"));
        }
        Ok(Self { knots })
    }

    pub fn constant(speed: T) -> Self {
        Self {
            knots: vec![(T::zero(), speed)],
        }
    }

    pub fn at(&self, t: T) -> T {
        let first = self.knots[0];
        if t <= first.0 {
            return first.1;
        }
        for w in self.knots.windows(2) {
            let (t0, v0) = w[0];
            let (t1, v1) = w[1];
            if t <= t1 {
                let s = (t - t0) / (t1 - t0);
                let blend = s * s * (T::of(3.0) - T::of(2.0) * s);
                return v0 + (v1 - v0) * blend;
            }
        }
        self.knots[self.knots.len() - 1].1
    }

    pub fn max_speed(&self) -> T {
        self.knots.iter().fold(T::zero(), |m, k| m.max(k.1))
    }

    pub fn min_speed(&self) -> T {
        self.knots.iter().fold(T::infinity(), |m, k| m.min(k.1))
    }
}

/// Straight-line speed tracking run of the plant under PID control.
#[derive(Debug, Clone)]
pub struct SpeedTrackingTask<T> {
    pub plant: Plant<T>,
    pub profile: SpeedProfile<T>,
    pub duration: T,
    /// PID period [s].
    pub control_period: T,
    /// Integrator step [s]; must divide `control_period`.
    pub plant_step: T,
    /// Runs whose speed exceeds this multiple of the profile maximum count
    /// as unstable.
    pub divergence_factor: T,
}

#[derive(Debug, Clone)]
pub struct SpeedRun<T> {
    pub mse: T,
    pub times: Vec<T>,
    pub reference: Vec<T>,
    pub speed: Vec<T>,
    pub diverged: bool,
}

impl<T: Real> SpeedTrackingTask<T> {
    pub fn new(plant: Plant<T>, profile: SpeedProfile<T>, duration: T) -> Self {
        Self {
            plant,
            profile,
            duration,
            control_period: T::of(0.01),
            plant_step: T::of(0.001),
            divergence_factor: T::of(3.0),
        }
    }

    /// Speed-tracking mean squared error; `+inf` for unstable loops.
    pub fn mse(&self, gains: PidGains<T>) -> T {
        let run = self.simulate(gains, false);
        if run.diverged {
            T::infinity()
        } else {
            run.mse
        }
    }

    pub fn simulate(&self, gains: PidGains<T>, record: bool) -> SpeedRun<T> {
        let mut pid = PidController::new(PidConfig::with_gains(gains));
        let mut switch = ThrottleBrakeSwitch::default();
        let mut state = PlantState::cruising(self.profile.at(T::zero()), &self.plant.params);
        let substeps = (self.control_period / self.plant_step).round().to_usize().unwrap_or(1).max(1);
        let n = (self.duration / self.control_period).round().to_usize().unwrap_or(0);
        let limit = self.divergence_factor * self.profile.max_speed().max(T::one());

        let mut run = SpeedRun {
            mse: T::zero(),
            times: Vec::new(),
            reference: Vec::new(),
            speed: Vec::new(),
            diverged: false,
        };
        let mut sum = T::zero();
        for k in 0..n {
            let t = T::from_usize(k).unwrap() * self.control_period;
            let v_ref = self.profile.at(t);
            let e = v_ref - state.v_x;
            sum += e * e;
            if record {
                run.times.push(t);
                run.reference.push(v_ref);
                run.speed.push(state.v_x);
            }
            let (throttle, brake) = switch.apply(pid.control(v_ref, state.v_x, self.control_period));
            let input = DriveInput {
                throttle,
                brake,
                steer: T::zero(),
            };
            for _ in 0..substeps {
                state = match self.plant.step(&state, &input, self.plant_step) {
                    Ok(s) => s,
                    Err(_) => {
                        run.diverged = true;
                        return run;
                    }
                };
            }
            state.time = T::from_usize(k + 1).unwrap() * self.control_period;
            if !state.v_x.is_finite() || state.v_x > limit {
                run.diverged = true;
                return run;
            }
        }
        run.mse = if n > 0 { sum / T::from_usize(n).unwrap() } else { T::zero() };
        run
    }
}
