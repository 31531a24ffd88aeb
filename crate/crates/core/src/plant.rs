//! Nonlinear "truth" vehicle: electric powertrain, wheel and brake dynamics on
//! the longitudinal axis, coupled with a dynamic bicycle model whose axle
//! forces come from the magic-formula tire curve.
//!
//! The state is advanced with a fixed-step RK4 integrator. Wheel speed is tied
//! to body speed algebraically (no longitudinal slip), so it is not integrated.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{wrap_angle, Real};

pub const GRAVITY: f64 = 9.81;

/// Below this longitudinal speed the lateral dynamics are frozen (slip angles
/// divide by `v_x`).
pub const LATERAL_SPEED_FLOOR: f64 = 0.5;

/// Magic-formula fitting coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pacejka<T> {
    pub b: T,
    pub c: T,
    pub d: T,
    pub e: T,
}

impl<T: Real> Default for Pacejka<T> {
    fn default() -> Self {
        Self {
            b: T::of(10.0),
            c: T::of(1.9),
            d: T::of(1.0),
            e: T::of(0.97),
        }
    }
}

impl<T: Real> Pacejka<T> {
    /// Slope of the curve at zero slip per newton of normal load.
    pub fn cornering_slope(&self) -> T {
        self.b * self.c * self.d
    }
}

/// Physical constants of the simulated car.
///
/// `front_axle_to_cg` is the distance from the front axle to the centre of
/// gravity and `rear_axle_to_cg` from the rear axle, so the front axle carries
/// `m g b / (a + b)` of static load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VehicleParams<T> {
    /// [kg]
    pub mass: T,
    pub drag_coeff: T,
    pub rolling_coeff: T,
    /// [m^2]
    pub frontal_area: T,
    /// [kg/m^3]
    pub air_density: T,
    pub gear_ratio: T,
    /// [m]
    pub wheel_radius: T,
    /// [kg m^2]
    pub wheel_inertia: T,
    pub wheel_damping: T,
    pub motor_efficiency: T,
    pub brake_friction: T,
    /// Brake pad mean radius [m].
    pub brake_pad_radius: T,
    /// Brake actuator diameter [m].
    pub brake_actuator_diameter: T,
    /// [m]
    pub front_axle_to_cg: T,
    /// [m]
    pub rear_axle_to_cg: T,
    /// [kg m^2]
    pub yaw_inertia: T,
    pub tire_front: Pacejka<T>,
    pub tire_rear: Pacejka<T>,
    /// First-order lag of the motor torque response [s].
    pub motor_time_constant: T,
    /// Motor torque at full throttle [N m].
    pub max_motor_torque: T,
    /// Brake line pressure at full pedal [Pa].
    pub max_brake_pressure: T,
    /// [V]
    pub battery_voltage: T,
    /// Side drag coefficient times side area [m^2].
    pub side_drag_area: T,
}

impl<T: Real> Default for VehicleParams<T> {
    fn default() -> Self {
        Self {
            mass: T::of(1575.0),
            drag_coeff: T::of(0.29),
            rolling_coeff: T::of(0.007),
            frontal_area: T::of(1.6),
            air_density: T::of(1.222),
            gear_ratio: T::of(3.4),
            wheel_radius: T::of(0.329),
            wheel_inertia: T::of(0.8),
            wheel_damping: T::of(0.001),
            motor_efficiency: T::of(0.95),
            brake_friction: T::of(0.9),
            brake_pad_radius: T::of(0.1778),
            brake_actuator_diameter: T::of(0.05),
            front_axle_to_cg: T::of(1.6),
            rear_axle_to_cg: T::of(1.2),
            yaw_inertia: T::of(2875.0),
            tire_front: Pacejka::default(),
            tire_rear: Pacejka::default(),
            motor_time_constant: T::of(0.2),
            max_motor_torque: T::of(250.0),
            max_brake_pressure: T::of(4.0e6),
            battery_voltage: T::of(350.0),
            side_drag_area: T::of(1.0),
        }
    }
}

impl<T: Real> VehicleParams<T> {
    pub fn wheelbase(&self) -> T {
        self.front_axle_to_cg + self.rear_axle_to_cg
    }

    /// Static normal load on one front tire [N].
    pub fn front_tire_load(&self) -> T {
        T::of(0.5) * self.mass * T::of(GRAVITY) * self.rear_axle_to_cg / self.wheelbase()
    }

    /// Static normal load on one rear tire [N].
    pub fn rear_tire_load(&self) -> T {
        T::of(0.5) * self.mass * T::of(GRAVITY) * self.front_axle_to_cg / self.wheelbase()
    }

    /// True front cornering stiffness per tire [N/rad].
    pub fn cf_true(&self) -> T {
        self.front_tire_load() * self.tire_front.cornering_slope()
    }

    /// True rear cornering stiffness per tire [N/rad].
    pub fn cr_true(&self) -> T {
        self.rear_tire_load() * self.tire_rear.cornering_slope()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("mass", self.mass),
            ("frontal_area", self.frontal_area),
            ("air_density", self.air_density),
            ("gear_ratio", self.gear_ratio),
            ("wheel_radius", self.wheel_radius),
            ("wheel_inertia", self.wheel_inertia),
            ("brake_pad_radius", self.brake_pad_radius),
            ("brake_actuator_diameter", self.brake_actuator_diameter),
            ("front_axle_to_cg", self.front_axle_to_cg),
            ("rear_axle_to_cg", self.rear_axle_to_cg),
            ("yaw_inertia", self.yaw_inertia),
            ("motor_time_constant", self.motor_time_constant),
            ("battery_voltage", self.battery_voltage),
        ];
        for (name, v) in positive {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::input(format!("{name} must be positive, got {v}")));
            }
        }
        let non_negative = [
            ("drag_coeff", self.drag_coeff),
            ("rolling_coeff", self.rolling_coeff),
            ("wheel_damping", self.wheel_damping),
            ("brake_friction", self.brake_friction),
            ("max_motor_torque", self.max_motor_torque),
            ("max_brake_pressure", self.max_brake_pressure),
            ("side_drag_area", self.side_drag_area),
        ];
        for (name, v) in non_negative {
            if !(v >= T::zero()) || !v.is_finite() {
                return Err(Error::input(format!("{name} must be non-negative, got {v}")));
            }
        }
        if !(self.motor_efficiency > T::zero() && self.motor_efficiency <= T::one()) {
            return Err(Error::input(format!(
                "motor_efficiency must lie in (0, 1], got {}",
                self.motor_efficiency
            )));
        }
        Ok(())
    }
}

/// Wind at one instant: speed [m/s] and the global direction the air moves
/// toward [rad].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WindSample<T> {
    pub speed: T,
    pub heading: T,
}

impl<T: Real> WindSample<T> {
    /// Splits the wind into the headwind component added to the vehicle speed
    /// in the drag term, and the lateral air speed along the body y axis.
    pub fn relative_to(&self, vehicle_heading: T) -> (T, T) {
        let rel = self.heading - vehicle_heading;
        (-self.speed * rel.cos(), self.speed * rel.sin())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum WindField<T> {
    Calm,
    Constant(WindSample<T>),
    /// Uniformly sampled from t = 0, linearly interpolated, held at the ends.
    Table { step: T, samples: Vec<WindSample<T>> },
}

impl<T: Real> WindField<T> {
    pub fn at(&self, t: T) -> WindSample<T> {
        match self {
            WindField::Calm => WindSample {
                speed: T::zero(),
                heading: T::zero(),
            },
            WindField::Constant(w) => *w,
            WindField::Table { step, samples } => {
                if samples.is_empty() {
                    return WindSample::default_zero();
                }
                let pos = (t / *step).max(T::zero());
                let i = pos.floor().to_usize().unwrap_or(usize::MAX);
                if i + 1 >= samples.len() {
                    return *samples.last().unwrap();
                }
                let frac = pos - T::from_usize(i).unwrap();
                let (a, b) = (samples[i], samples[i + 1]);
                WindSample {
                    speed: a.speed + (b.speed - a.speed) * frac,
                    heading: a.heading + (b.heading - a.heading) * frac,
                }
            }
        }
    }
}

impl<T: Real> WindSample<T> {
    fn default_zero() -> Self {
        Self {
            speed: T::zero(),
            heading: T::zero(),
        }
    }
}

/// Road and weather.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment<T> {
    /// Road elevation angle [rad].
    pub grade: T,
    /// Adhesion coefficient.
    pub mu: T,
    /// Camber angle [rad].
    pub camber: T,
    pub wind: WindField<T>,
}

impl<T: Real> Default for Environment<T> {
    fn default() -> Self {
        Self {
            grade: T::zero(),
            mu: T::of(0.95),
            camber: T::zero(),
            wind: WindField::Calm,
        }
    }
}

impl<T: Real> Environment<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu > T::zero() && self.mu <= T::of(1.2)) {
            return Err(Error::input(format!("adhesion mu must lie in (0, 1.2], got {}", self.mu)));
        }
        if let WindField::Table { step, samples } = &self.wind {
            if !(*step > T::zero()) || samples.is_empty() {
                return Err(Error::input("wind table needs a positive step and samples"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlantState<T> {
    /// Simulated time [s].
    pub time: T,
    pub v_x: T,
    pub v_y: T,
    pub psi: T,
    pub psi_dot: T,
    /// Global position [m].
    pub x: T,
    pub y: T,
    pub omega_w: T,
    pub motor_torque: T,
    /// Monitoring output only [A].
    pub battery_current: T,
}

impl<T: Real> PlantState<T> {
    /// State moving straight along +x at `speed`, wheels rolling.
    pub fn cruising(speed: T, params: &VehicleParams<T>) -> Self {
        Self {
            time: T::zero(),
            v_x: speed,
            v_y: T::zero(),
            psi: T::zero(),
            psi_dot: T::zero(),
            x: T::zero(),
            y: T::zero(),
            omega_w: speed / params.wheel_radius,
            motor_torque: T::zero(),
            battery_current: T::zero(),
        }
    }
}

/// Actuator commands held over one integration step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DriveInput<T> {
    /// Normalized pedal in [0, 1].
    pub throttle: T,
    /// Normalized pedal in [0, 1].
    pub brake: T,
    /// Front wheel steering angle [rad].
    pub steer: T,
}

/// Per-tire lateral forces and slip angles, as an onboard estimator would
/// deliver them.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TireTruth<T> {
    pub front_force: T,
    pub rear_force: T,
    pub front_slip: T,
    pub rear_slip: T,
}

/// Drag, rolling resistance and grade force at the current speed [N].
pub fn longitudinal_forces<T: Real>(state: &PlantState<T>, params: &VehicleParams<T>, env: &Environment<T>) -> T {
    let (headwind, _) = env.wind.at(state.time).relative_to(state.psi);
    resistive_force(state.v_x, headwind, params, env)
}

fn resistive_force<T: Real>(v: T, headwind: T, params: &VehicleParams<T>, env: &Environment<T>) -> T {
    let g = T::of(GRAVITY);
    let air = v + headwind;
    T::of(0.5) * params.air_density * params.drag_coeff * params.frontal_area * air * air.abs()
        + params.mass * g * params.rolling_coeff * env.grade.cos()
        + params.mass * g * env.grade.sin()
}

/// Tractive force delivered by a wheel torque under the no-slip assumption.
///
/// The wheel inertia term opposes acceleration: spinning the wheel up
/// consumes torque.
pub fn drive_force<T: Real>(torque: T, omega_w: T, omega_w_dot: T, params: &VehicleParams<T>) -> T {
    (torque - params.wheel_damping * omega_w - params.wheel_inertia * omega_w_dot) / params.wheel_radius
}

/// Magic-formula tire force for slip `k` under normal load `fz`.
pub fn pacejka_force<T: Real>(k: T, fz: T, coeffs: &Pacejka<T>) -> T {
    let bk = coeffs.b * k;
    fz * coeffs.d * (coeffs.c * (bk - coeffs.e * (bk - bk.atan())).atan()).sin()
}

/// Brake torque for line pressure `pressure` [Pa].
pub fn brake_torque<T: Real>(pressure: T, params: &VehicleParams<T>) -> Result<T> {
    if !(pressure >= T::zero()) {
        return Err(Error::input(format!("brake pressure must be non-negative, got {pressure}")));
    }
    let d = params.brake_actuator_diameter;
    Ok(params.brake_friction * pressure * T::PI() * d * d * params.brake_pad_radius / T::of(2.0))
}

/// Front and rear slip angles of the bicycle model (small-angle form).
/// Zero below the lateral speed floor.
pub fn slip_angles<T: Real>(state: &PlantState<T>, steer: T, params: &VehicleParams<T>) -> (T, T) {
    if state.v_x < T::of(LATERAL_SPEED_FLOOR) {
        return (T::zero(), T::zero());
    }
    let a = params.front_axle_to_cg;
    let b = params.rear_axle_to_cg;
    let front = steer - (state.v_y + a * state.psi_dot) / state.v_x;
    let rear = -(state.v_y - b * state.psi_dot) / state.v_x;
    (front, rear)
}

const N_ODE: usize = 7;
type OdeState<T> = [T; N_ODE];

#[derive(Debug, Clone)]
pub struct Plant<T> {
    pub params: VehicleParams<T>,
    pub env: Environment<T>,
}

impl<T: Real> Plant<T> {
    pub fn new(params: VehicleParams<T>, env: Environment<T>) -> Result<Self> {
        params.validate()?;
        env.validate()?;
        Ok(Self { params, env })
    }

    pub fn tire_truth(&self, state: &PlantState<T>, steer: T) -> TireTruth<T> {
        let (front_slip, rear_slip) = slip_angles(state, steer, &self.params);
        TireTruth {
            front_force: pacejka_force(front_slip, self.params.front_tire_load(), &self.params.tire_front),
            rear_force: pacejka_force(rear_slip, self.params.rear_tire_load(), &self.params.tire_rear),
            front_slip,
            rear_slip,
        }
    }

    /// Advances the plant by `dt` with a single RK4 step.
    pub fn step(&self, state: &PlantState<T>, input: &DriveInput<T>, dt: T) -> Result<PlantState<T>> {
        if !(dt > T::zero()) || !dt.is_finite() {
            return Err(Error::input(format!("time step must be positive, got {dt}")));
        }
        if !(input.throttle.is_finite() && input.brake.is_finite() && input.steer.is_finite()) {
            return Err(Error::input("non-finite actuator command"));
        }
        let s0: OdeState<T> = [
            state.v_x,
            state.v_y,
            state.psi,
            state.psi_dot,
            state.x,
            state.y,
            state.motor_torque,
        ];
        let half = dt / T::of(2.0);
        let t = state.time;
        let k1 = self.derivative(&s0, t, input);
        let k2 = self.derivative(&axpy(&s0, half, &k1), t + half, input);
        let k3 = self.derivative(&axpy(&s0, half, &k2), t + half, input);
        let k4 = self.derivative(&axpy(&s0, dt, &k3), t + dt, input);
        let sixth = dt / T::of(6.0);
        let mut s1 = s0;
        for i in 0..N_ODE {
            s1[i] += sixth * (k1[i] + T::of(2.0) * (k2[i] + k3[i]) + k4[i]);
        }

        let p = &self.params;
        let v_x = s1[0].max(T::zero());
        let lateral = state.v_x >= T::of(LATERAL_SPEED_FLOOR);
        let omega_w = v_x / p.wheel_radius;
        let motor_torque = s1[6];
        let motor_speed = p.gear_ratio * omega_w;
        let efficiency = if motor_torque * motor_speed >= T::zero() {
            p.motor_efficiency
        } else {
            T::one()
        };
        Ok(PlantState {
            time: t + dt,
            v_x,
            v_y: if lateral { s1[1] } else { state.v_y },
            psi: wrap_angle(s1[2]),
            psi_dot: if lateral { s1[3] } else { state.psi_dot },
            x: s1[4],
            y: s1[5],
            omega_w,
            motor_torque,
            battery_current: motor_torque * motor_speed / (p.battery_voltage * efficiency),
        })
    }

    fn derivative(&self, s: &OdeState<T>, t: T, input: &DriveInput<T>) -> OdeState<T> {
        let p = &self.params;
        let two = T::of(2.0);
        let [v_x, v_y, psi, r, _, _, motor_torque] = *s;

        let torque_cmd = input.throttle.max(T::zero()).min(T::one()) * p.max_motor_torque;
        let d_motor = (torque_cmd - motor_torque) / p.motor_time_constant;
        let pressure = input.brake.max(T::zero()).min(T::one()) * p.max_brake_pressure;
        // brake_torque only fails on negative pressure, which the clamp rules out
        let t_brake = brake_torque(pressure, p).unwrap_or(T::zero());

        let wind = self.env.wind.at(t);
        let (headwind, lateral_air) = wind.relative_to(psi);
        let moving = v_x > T::zero();
        let speed = v_x.max(T::zero());
        let f_res = resistive_force(speed, headwind, p, &self.env);

        let lateral = v_x >= T::of(LATERAL_SPEED_FLOOR);
        let delta = input.steer;
        let (fy_front, fy_rear) = if lateral {
            let a = p.front_axle_to_cg;
            let b = p.rear_axle_to_cg;
            let alpha_f = delta - (v_y + a * r) / v_x;
            let alpha_r = -(v_y - b * r) / v_x;
            (
                pacejka_force(alpha_f, p.front_tire_load(), &p.tire_front),
                pacejka_force(alpha_r, p.rear_tire_load(), &p.tire_rear),
            )
        } else {
            (T::zero(), T::zero())
        };

        // Wheel torque balance with omega_w = v / R_w folded into an effective mass.
        let omega_w = speed / p.wheel_radius;
        let wheel_torque = p.gear_ratio * motor_torque - if moving { t_brake } else { T::zero() };
        let traction = drive_force(wheel_torque, omega_w, T::zero(), p);
        let coupling = if lateral {
            p.mass * v_y * r - two * fy_front * delta.sin()
        } else {
            T::zero()
        };
        let effective_mass = p.mass + p.wheel_inertia / (p.wheel_radius * p.wheel_radius);
        let mut d_vx = (traction - f_res + coupling) / effective_mass;
        if !moving && d_vx < T::zero() {
            // brakes and rolling resistance hold the car, they cannot reverse it
            d_vx = T::zero();
        }

        let (d_vy, d_r) = if lateral {
            let side_wind = T::of(0.5) * p.air_density * p.side_drag_area * lateral_air * lateral_air.abs();
            let front_y = two * fy_front * delta.cos();
            let rear_y = two * fy_rear;
            (
                (front_y + rear_y + side_wind) / p.mass - v_x * r,
                (p.front_axle_to_cg * front_y - p.rear_axle_to_cg * rear_y) / p.yaw_inertia,
            )
        } else {
            (T::zero(), T::zero())
        };

        [
            d_vx,
            d_vy,
            r,
            d_r,
            speed * psi.cos() - v_y * psi.sin(),
            speed * psi.sin() + v_y * psi.cos(),
            d_motor,
        ]
    }
}

fn axpy<T: Real>(x: &OdeState<T>, a: T, d: &OdeState<T>) -> OdeState<T> {
    let mut out = *x;
    for i in 0..N_ODE {
        out[i] += a * d[i];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn plant() -> Plant<f64> {
        Plant::new(VehicleParams::default(), Environment::default()).unwrap()
    }

    #[test]
    fn resistive_force_hand_values() {
        let p = VehicleParams::<f64>::default();
        let env = Environment::default();
        let mut s = PlantState::cruising(0.0, &p);
        assert_relative_eq!(longitudinal_forces(&s, &p, &env), 1575.0 * 9.81 * 0.007, epsilon = 1e-9);
        assert!((longitudinal_forces(&s, &p, &env) - 108.2).abs() < 0.05);
        s.v_x = 20.0;
        assert!((longitudinal_forces(&s, &p, &env) - 221.6).abs() < 0.1);
        let p0 = VehicleParams { rolling_coeff: 0.0, ..p };
        s.v_x = 0.0;
        assert_eq!(longitudinal_forces(&s, &p0, &env), 0.0);
    }

    #[test]
    fn headwind_adds_drag() {
        let p = VehicleParams::<f64>::default();
        let calm = Environment::default();
        let windy = Environment {
            wind: WindField::Constant(WindSample { speed: 5.0, heading: std::f64::consts::PI }),
            ..Environment::default()
        };
        let s = PlantState::cruising(10.0, &p);
        let expected = longitudinal_forces(&s, &p, &calm) + 0.5 * 1.222 * 0.29 * 1.6 * (225.0 - 100.0);
        assert_relative_eq!(longitudinal_forces(&s, &p, &windy), expected, epsilon = 1e-6);
        assert!(longitudinal_forces(&s, &p, &windy) > longitudinal_forces(&s, &p, &calm));
    }

    #[test]
    fn drive_force_hand_values() {
        let p = VehicleParams::<f64>::default();
        assert_eq!(drive_force(0.0, 0.0, 0.0, &p), 0.0);
        assert!((drive_force(100.0, 10.0, 0.0, &p) - 303.9).abs() < 0.05);
        let lossless = VehicleParams { wheel_damping: 0.0, ..p.clone() };
        assert_relative_eq!(drive_force(80.0, 40.0, 0.0, &lossless), 80.0 / 0.329, epsilon = 1e-12);
        // accelerating the wheel costs force
        assert!(drive_force(100.0, 10.0, 5.0, &p) < drive_force(100.0, 10.0, 0.0, &p));
    }

    #[test]
    fn pacejka_values() {
        let c = Pacejka::<f64>::default();
        assert_eq!(pacejka_force(0.0, 4000.0, &c), 0.0);
        // one-line direct evaluation
        let bk: f64 = 10.0 * 0.1;
        let expected = 4000.0 * (1.9 * (bk - 0.97 * (bk - bk.atan())).atan()).sin();
        assert_relative_eq!(pacejka_force(0.1, 4000.0, &c), expected, epsilon = 1e-9);
        for i in -100..=100 {
            let k = i as f64 * 0.01;
            assert!(pacejka_force(k, 4000.0, &c).abs() <= 4000.0 * c.d + 1e-9);
        }
        assert_relative_eq!(pacejka_force(-0.03, 3000.0, &c), -pacejka_force(0.03, 3000.0, &c));
    }

    #[test]
    fn brake_torque_values() {
        let p = VehicleParams::<f64>::default();
        assert_eq!(brake_torque(0.0, &p).unwrap(), 0.0);
        assert!((brake_torque(1e6, &p).unwrap() - 628.3).abs() < 0.2);
        let wide = VehicleParams { brake_actuator_diameter: 0.1, ..p.clone() };
        assert_relative_eq!(
            brake_torque(1e6, &wide).unwrap(),
            4.0 * brake_torque(1e6, &p).unwrap(),
            max_relative = 1e-12
        );
        assert!(matches!(brake_torque(-1.0, &p), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn cornering_stiffness_truth() {
        let p = VehicleParams::<f64>::default();
        let fzf = 1575.0 * 9.81 * 1.2 / 2.8 / 2.0;
        assert_relative_eq!(p.cf_true(), fzf * 19.0, epsilon = 1e-9);
        // magic-formula slope at zero matches the declared stiffness
        let h = 1e-7;
        let slope = pacejka_force(h, p.front_tire_load(), &p.tire_front) / h;
        assert_relative_eq!(slope, p.cf_true(), max_relative = 1e-6);
    }

    #[test]
    fn rejects_bad_step() {
        let pl = plant();
        let s = PlantState::default();
        assert!(pl.step(&s, &DriveInput::default(), 0.0).is_err());
        assert!(pl.step(&s, &DriveInput::default(), -1e-3).is_err());
        let nan = DriveInput { steer: f64::NAN, ..DriveInput::default() };
        assert!(pl.step(&s, &nan, 1e-3).is_err());
    }

    #[test]
    fn rest_is_equilibrium() {
        let pl = plant();
        let mut s = PlantState::default();
        for _ in 0..1000 {
            s = pl.step(&s, &DriveInput::default(), 1e-3).unwrap();
        }
        assert_eq!(s.v_x, 0.0);
        assert_eq!(s.x, 0.0);
        assert_eq!(s.y, 0.0);
        assert_eq!(s.psi, 0.0);
        // full brake at rest does not reverse the car either
        let brake = DriveInput { brake: 1.0, ..DriveInput::default() };
        s = pl.step(&s, &brake, 1e-3).unwrap();
        assert_eq!(s.v_x, 0.0);
    }

    #[test]
    fn full_throttle_accelerates_monotonically() {
        let pl = plant();
        let mut s = PlantState::default();
        let input = DriveInput { throttle: 1.0, ..DriveInput::default() };
        let mut prev = s.v_x;
        for _ in 0..20_000 {
            s = pl.step(&s, &input, 1e-3).unwrap();
            assert!(s.v_x >= prev);
            prev = s.v_x;
        }
        assert!(s.v_x > 20.0);
        // sign analysis: acceleration sign follows drive minus resistance
        let p = &pl.params;
        let drive = drive_force(p.gear_ratio * s.motor_torque, s.omega_w, 0.0, p);
        assert!(drive > longitudinal_forces(&s, p, &pl.env));
    }

    #[test]
    fn coasting_never_speeds_up() {
        let pl = plant();
        let mut s = PlantState::cruising(25.0, &pl.params);
        let mut prev = s.v_x;
        for _ in 0..5000 {
            s = pl.step(&s, &DriveInput::default(), 1e-3).unwrap();
            assert!(s.v_x <= prev);
            assert!((s.omega_w - s.v_x / pl.params.wheel_radius).abs() < 1e-9);
            prev = s.v_x;
        }
        assert!(s.v_x < 25.0);
    }

    #[test]
    fn braking_stops_without_reversing() {
        let pl = plant();
        let mut s = PlantState::cruising(10.0, &pl.params);
        let input = DriveInput { brake: 1.0, ..DriveInput::default() };
        for _ in 0..10_000 {
            s = pl.step(&s, &input, 1e-3).unwrap();
            assert!(s.v_x >= 0.0);
        }
        assert_eq!(s.v_x, 0.0);
    }

    #[test]
    fn battery_current_sign_follows_power() {
        let pl = plant();
        let mut s = PlantState::cruising(10.0, &pl.params);
        let input = DriveInput { throttle: 0.5, ..DriveInput::default() };
        for _ in 0..500 {
            s = pl.step(&s, &input, 1e-3).unwrap();
        }
        let p = &pl.params;
        let expected = s.motor_torque * p.gear_ratio * s.omega_w / (p.battery_voltage * p.motor_efficiency);
        assert_relative_eq!(s.battery_current, expected, max_relative = 1e-12);
        assert!(s.battery_current > 0.0);
    }

    #[test]
    fn low_speed_freezes_lateral_dynamics() {
        let pl = plant();
        let mut s = PlantState::cruising(0.3, &pl.params);
        let input = DriveInput { steer: 0.2, ..DriveInput::default() };
        s = pl.step(&s, &input, 1e-3).unwrap();
        assert_eq!(s.v_y, 0.0);
        assert_eq!(s.psi_dot, 0.0);
    }

    #[test]
    fn works_in_single_precision() {
        let pl = Plant::<f32>::new(VehicleParams::default(), Environment::default()).unwrap();
        let mut s = PlantState::cruising(15.0f32, &pl.params);
        let input = DriveInput { throttle: 0.2f32, brake: 0.0, steer: 0.01 };
        for _ in 0..1000 {
            s = pl.step(&s, &input, 1e-3).unwrap();
        }
        assert!(s.psi_dot > 0.0 && s.v_x.is_finite());
    }
}
