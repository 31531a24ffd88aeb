//! Scenario files: TOML documents with a `format_version` key.
//!
//! ```toml
//! format_version = 1
//! name = "double_lane_change"
//! duration = 20.0
//! seed = 7
//!
//! [reference]
//! kind = "double_lane_change"      # or "straight", "waypoints"
//!
//! [speed]
//! knots = [[0.0, 13.89], [8.0, 18.0]]
//!
//! [wind]
//! kind = "gusty"                   # or "calm", "constant"
//! ```
//!
//! Every other table (`road`, `noise`, `vehicle`, `pid`, `pso`, `mpc`, `rls`)
//! is optional and falls back to defaults field by field.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::reference::{ReferencePath, ReferenceSpec};
use super::wind::WindSpec;
use crate::envelope::{plan_speed, EnvelopeConfig, RoadPoint};
use crate::error::{Error, Result};
use crate::lpv::StiffnessBounds;
use crate::mpc::{CostMode, MpcConfig, StateLimit};
use crate::pid::{PidGains, SpeedProfile};
use crate::plant::{Environment, Plant, VehicleParams};
use crate::pso::{default_gain_bounds, PsoConfig};
use crate::rls::RlsConfig;

pub const FORMAT_VERSION: u32 = 1;

/// Gains used when a scenario neither lists gains nor asks for tuning.
pub const DEFAULT_GAINS: PidGains<f64> = PidGains {
    kp: 5.52,
    ki: 0.0547,
    kd: 0.469,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub format_version: u32,
    pub name: String,
    /// [s]
    pub duration: f64,
    #[serde(default)]
    pub seed: u64,
    pub reference: ReferenceSpec,
    pub speed: SpeedProfile<f64>,
    #[serde(default)]
    pub road: RoadSpec,
    #[serde(default)]
    pub wind: WindSpec,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub vehicle: VehicleParams<f64>,
    #[serde(default)]
    pub pid: PidSpec,
    #[serde(default)]
    pub pso: PsoSpec,
    #[serde(default)]
    pub mpc: MpcSpec,
    #[serde(default)]
    pub rls: RlsSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoadSpec {
    pub mu: f64,
    /// [rad]
    pub camber: f64,
    /// [rad]
    pub grade: f64,
}

impl Default for RoadSpec {
    fn default() -> Self {
        Self {
            mu: 0.95,
            camber: 0.0,
            grade: 0.0,
        }
    }
}

/// Gaussian noise on the tire measurements fed to the estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    /// [N]
    pub force_sigma: f64,
    /// [rad]
    pub slip_sigma: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            force_sigma: 50.0,
            slip_sigma: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct PidSpec {
    pub gains: Option<PidGains<f64>>,
    /// Tune the gains with PSO before running.
    pub tune: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PsoSpec {
    pub particles: usize,
    pub generations: usize,
    /// Defaults to the scenario seed.
    pub seed: Option<u64>,
}

impl Default for PsoSpec {
    fn default() -> Self {
        Self {
            particles: 30,
            generations: 25,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeSpec {
    Standard,
    Enhanced,
}

impl From<ModeSpec> for CostMode {
    fn from(m: ModeSpec) -> Self {
        match m {
            ModeSpec::Standard => CostMode::Standard,
            ModeSpec::Enhanced => CostMode::Enhanced,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MpcSpec {
    pub n_p: usize,
    pub n_c: usize,
    /// Diagonal of the `[y, psi]` weight.
    pub q: [f64; 2],
    pub r: f64,
    pub beta: f64,
    pub rho_slack: f64,
    pub eps_scale: f64,
    pub ts: f64,
    pub du_max: f64,
    pub u_max: f64,
    /// [m/s]
    pub lateral_velocity_limit: f64,
    /// [rad/s]
    pub yaw_rate_limit: f64,
    pub mode: ModeSpec,
}

impl Default for MpcSpec {
    fn default() -> Self {
        let d = MpcConfig::<f64>::default();
        Self {
            n_p: d.n_p,
            n_c: d.n_c,
            q: [d.q[(0, 0)], d.q[(1, 1)]],
            r: d.r,
            beta: d.beta,
            rho_slack: d.rho_slack,
            eps_scale: d.eps_scale,
            ts: d.ts,
            du_max: d.du_max,
            u_max: d.u_max,
            lateral_velocity_limit: 4.0,
            yaw_rate_limit: 1.0,
            mode: ModeSpec::Enhanced,
        }
    }
}

impl MpcSpec {
    pub fn config(&self, mode: CostMode) -> MpcConfig<f64> {
        MpcConfig {
            n_p: self.n_p,
            n_c: self.n_c,
            q: nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_vec(self.q.to_vec())),
            r: self.r,
            beta: self.beta,
            rho_slack: self.rho_slack,
            eps_scale: self.eps_scale,
            ts: self.ts,
            du_max: self.du_max,
            u_max: self.u_max,
            state_limits: vec![
                StateLimit {
                    index: 0,
                    bound: self.lateral_velocity_limit,
                },
                StateLimit {
                    index: 2,
                    bound: self.yaw_rate_limit,
                },
            ],
            cost_mode: mode,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RlsSpec {
    pub forgetting: f64,
    pub initial: [f64; 2],
    pub covariance: f64,
    pub dead_band: f64,
    pub bounds: StiffnessBounds<f64>,
}

impl Default for RlsSpec {
    fn default() -> Self {
        let d = RlsConfig::<f64>::default();
        Self {
            forgetting: d.forgetting,
            initial: d.initial_estimate,
            covariance: d.initial_covariance,
            dead_band: d.dead_band,
            bounds: d.bounds,
        }
    }
}

impl RlsSpec {
    pub fn config(&self) -> RlsConfig<f64> {
        RlsConfig {
            initial_estimate: self.initial,
            initial_covariance: self.covariance,
            forgetting: self.forgetting,
            dead_band: self.dead_band,
            bounds: self.bounds,
            ..RlsConfig::default()
        }
    }
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self> {
        Self::from_table(load_table(path)?)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let value: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Scenario(e.to_string()))?;
        Self::from_table(value)
    }

    /// Parses and validates an already-loaded document.
    pub fn from_table(table: toml::Table) -> Result<Self> {
        match table.get("format_version") {
            Some(toml::Value::Integer(v)) if *v == FORMAT_VERSION as i64 => {}
            Some(v) => {
                return Err(Error::Scenario(format!(
                    "unsupported format_version {v}, expected {FORMAT_VERSION}"
                )))
            }
            None => return Err(Error::Scenario("missing format_version".into())),
        }
        let scenario: Scenario = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Scenario(e.to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Scenario(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::Scenario(format!("duration must be positive, got {}", self.duration)));
        }
        SpeedProfile::new(self.speed.knots.clone()).map_err(scenario_error)?;
        if self.speed.max_speed() > 60.0 {
            return Err(Error::Scenario("speed profile exceeds 60 m/s".into()));
        }
        if !(self.noise.force_sigma >= 0.0 && self.noise.slip_sigma >= 0.0) {
            return Err(Error::Scenario("noise levels must be non-negative".into()));
        }
        if self.pso.particles == 0 || self.pso.generations == 0 {
            return Err(Error::Scenario("PSO needs particles and generations".into()));
        }
        self.plant().map_err(scenario_error)?;
        self.mpc.config(self.mpc.mode.into()).validate().map_err(scenario_error)?;
        crate::rls::RlsEstimator::new(self.rls.config()).map_err(scenario_error)?;
        self.check_speed_envelope()
    }

    pub fn environment(&self) -> Result<Environment<f64>> {
        Ok(Environment {
            grade: self.road.grade,
            mu: self.road.mu,
            camber: self.road.camber,
            wind: self.wind.field(self.duration, self.seed)?,
        })
    }

    pub fn plant(&self) -> Result<Plant<f64>> {
        Plant::new(self.vehicle.clone(), self.environment()?)
    }

    /// Distance covered by the speed profile over the run.
    pub fn travel(&self) -> f64 {
        let dt = 0.01;
        let n = (self.duration / dt).ceil() as usize;
        (0..n).map(|k| self.speed.at(k as f64 * dt) * dt).sum()
    }

    pub fn reference_path(&self) -> Result<ReferencePath> {
        ReferencePath::new(&self.reference, self.travel().max(1.0) + 50.0)
    }

    pub fn pso_config(&self) -> PsoConfig<f64> {
        let mut cfg = PsoConfig::new(default_gain_bounds(), self.pso.seed.unwrap_or(self.seed));
        cfg.n_particles = self.pso.particles;
        cfg.generations = self.pso.generations;
        cfg
    }

    pub fn gains(&self) -> PidGains<f64> {
        self.pid.gains.unwrap_or(DEFAULT_GAINS)
    }

    /// Checks that following the speed profile along the reference never asks
    /// for more than the envelope planner allows.
    fn check_speed_envelope(&self) -> Result<()> {
        let path = self.reference_path()?;
        let dt = 0.05;
        let n = (self.duration / dt).ceil() as usize;
        let mut s = 0.0;
        let mut requested = Vec::with_capacity(n);
        let mut road = Vec::with_capacity(n);
        let mut times = Vec::with_capacity(n);
        for k in 0..n {
            let t = k as f64 * dt;
            let v = self.speed.at(t);
            let x = path.x_at_station(s);
            requested.push(v);
            road.push(RoadPoint {
                station: s,
                curvature: path.curvature(x),
                camber: self.road.camber,
                mu: self.road.mu,
            });
            times.push(t);
            s += v * dt;
        }
        let cfg = EnvelopeConfig {
            u_max: self.mpc.u_max,
            ..EnvelopeConfig::default()
        };
        let planned = plan_speed(&requested, &road, &cfg).map_err(scenario_error)?;
        for ((v, p), t) in requested.iter().zip(&planned).zip(&times) {
            if *v > p + 1e-9 {
                return Err(Error::Scenario(format!(
                    "speed profile asks {v:.3} m/s at t = {t:.2} s, envelope allows {p:.3} m/s"
                )));
            }
        }
        Ok(())
    }
}

/// Reads a scenario document without interpreting it.
pub fn load_table(path: &Path) -> Result<toml::Table> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    text.parse().map_err(|e: toml::de::Error| Error::Scenario(format!("{}: {e}", path.display())))
}

fn scenario_error(e: Error) -> Error {
    match e {
        Error::Scenario(_) => e,
        other => Error::Scenario(other.to_string()),
    }
}

/// Sets a dotted key such as `mpc.beta` in a scenario document, creating
/// intermediate tables.
pub fn set_key(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| Error::Scenario(format!("bad key `{key}`")))?;
    let mut cur = table;
    for p in parts {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Scenario(format!("`{p}` in `{key}` is not a table")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// Parses a command-line value as TOML, falling back to a bare string.
pub fn parse_value(text: &str) -> toml::Value {
    let doc = format!("v = {text}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(text.to_string())),
        Err(_) => toml::Value::String(text.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
format_version = 1
name = "minimal"
duration = 5.0

[reference]
kind = "straight"

[speed]
knots = [[0.0, 10.0]]
"#;

    #[test]
    fn minimal_defaults() {
        let s = Scenario::from_toml_str(MINIMAL).unwrap();
        assert_eq!(s.road.mu, 0.95);
        assert_eq!(s.mpc.n_p, 9);
        assert_eq!(s.wind, WindSpec::Calm);
        assert_eq!(s.gains(), DEFAULT_GAINS);
    }

    #[test]
    fn version_checked() {
        let bad = MINIMAL.replace("format_version = 1", "format_version = 2");
        assert!(matches!(Scenario::from_toml_str(&bad), Err(Error::Scenario(_))));
        let missing = MINIMAL.replace("format_version = 1", "");
        assert!(Scenario::from_toml_str(&missing).is_err());
    }

    #[test]
    fn unknown_fields_rejected() {
        let bad = format!("{MINIMAL}\n[road]\nfriction = 1.0\n");
        assert!(Scenario::from_toml_str(&bad).is_err());
    }

    #[test]
    fn envelope_violation_rejected() {
        // 0.05 1/m bend admits about 13.6 m/s
        let text = r#"
format_version = 1
name = "too_fast"
duration = 10.0
[reference]
kind = "waypoints"
points = [[0.0, 0.0], [20.0, 0.0], [40.0, 10.0], [60.0, 0.0], [80.0, 0.0]]
[speed]
knots = [[0.0, 25.0]]
"#;
        let err = Scenario::from_toml_str(text).unwrap_err();
        assert!(err.to_string().contains("envelope"), "{err}");
    }

    #[test]
    fn dotted_keys() {
        let mut t: toml::Table = MINIMAL.parse().unwrap();
        set_key(&mut t, "mpc.beta", parse_value("2.5")).unwrap();
        set_key(&mut t, "seed", parse_value("11")).unwrap();
        set_key(&mut t, "mpc.mode", parse_value("standard")).unwrap();
        let s = Scenario::from_table(t).unwrap();
        assert_eq!(s.mpc.beta, 2.5);
        assert_eq!(s.seed, 11);
        assert_eq!(s.mpc.mode, ModeSpec::Standard);
        let mut t: toml::Table = MINIMAL.parse().unwrap();
        assert!(set_key(&mut t, "name.x", parse_value("1")).is_err());
    }

    #[test]
    fn round_trips_through_toml() {
        let s = Scenario::from_toml_str(MINIMAL).unwrap();
        let again = Scenario::from_toml_str(&s.to_toml_string().unwrap()).unwrap();
        assert_eq!(s, again);
    }
}
