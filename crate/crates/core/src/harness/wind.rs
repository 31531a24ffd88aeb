//! Wind profiles for scenarios.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plant::{WindField, WindSample};

/// RNG stream reserved for wind generation.
const WIND_STREAM: u64 = 2;
/// Sampling step of generated wind tables [s].
pub const WIND_TABLE_STEP: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WindSpec {
    #[default]
    Calm,
    Constant {
        speed: f64,
        /// Direction the air moves toward [rad].
        heading: f64,
    },
    /// Gust sequence: each `period` seconds a half-sine of random amplitude
    /// in `[min_fraction, 1] * peak`; heading drifts at `heading_rate` with a
    /// slow seeded oscillation on top.
    Gusty {
        #[serde(default = "default_peak")]
        peak: f64,
        #[serde(default = "default_period")]
        period: f64,
        #[serde(default)]
        heading: f64,
        #[serde(default = "default_heading_rate")]
        heading_rate: f64,
        #[serde(default = "default_min_fraction")]
        min_fraction: f64,
    },
}

fn default_peak() -> f64 {
    8.0
}
fn default_period() -> f64 {
    4.0
}
fn default_heading_rate() -> f64 {
    0.15
}
fn default_min_fraction() -> f64 {
    0.5
}

impl WindSpec {
    pub fn field(&self, duration: f64, seed: u64) -> Result<WindField<f64>> {
        match *self {
            WindSpec::Calm => Ok(WindField::Calm),
            WindSpec::Constant { speed, heading } => {
                if !(speed >= 0.0) || !heading.is_finite() {
                    return Err(Error::Scenario("constant wind needs speed >= 0 and a finite heading".into()));
                }
                Ok(WindField::Constant(WindSample { speed, heading }))
            }
            WindSpec::Gusty {
                peak,
                period,
                heading,
                heading_rate,
                min_fraction,
            } => {
                if !(peak >= 0.0 && period > 0.0 && (0.0..=1.0).contains(&min_fraction)) {
                    return Err(Error::Scenario(
                        "gusty wind needs peak >= 0, period > 0 and min_fraction in [0, 1]".into(),
                    ));
                }
                if !(heading.is_finite() && heading_rate.is_finite()) {
                    return Err(Error::Scenario("non-finite wind heading".into()));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(WIND_STREAM);
                let n_gusts = (duration / period).ceil() as usize + 2;
                let amplitudes: Vec<f64> = (0..n_gusts)
                    .map(|_| peak * rng.random_range(min_fraction..=1.0))
                    .collect();
                let phase = rng.random_range(0.0..2.0 * PI);
                let n = (duration / WIND_TABLE_STEP).ceil() as usize + 2;
                let samples = (0..n)
                    .map(|i| {
                        let t = i as f64 * WIND_TABLE_STEP;
                        let k = ((t / period).floor() as usize).min(n_gusts - 1);
                        let local = t - k as f64 * period;
                        WindSample {
                            speed: amplitudes[k] * (PI * local / period).sin().max(0.0),
                            heading: heading + heading_rate * t + 0.5 * (2.0 * PI * t / (3.0 * period) + phase).sin(),
                        }
                    })
                    .collect();
                Ok(WindField::Table {
                    step: WIND_TABLE_STEP,
                    samples,
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gusty() -> WindSpec {
        WindSpec::Gusty {
            peak: 8.0,
            period: 4.0,
            heading: 1.0,
            heading_rate: 0.1,
            min_fraction: 0.5,
        }
    }

    #[test]
    fn gusts_bounded_by_peak() {
        let field = gusty().field(30.0, 3).unwrap();
        let mut top: f64 = 0.0;
        for i in 0..3000 {
            let w = field.at(i as f64 * 0.01);
            assert!(w.speed >= 0.0 && w.speed <= 8.0);
            top = top.max(w.speed);
        }
        assert!(top > 3.9);
    }

    #[test]
    fn seeded_and_deterministic() {
        let a = gusty().field(10.0, 5).unwrap();
        let b = gusty().field(10.0, 5).unwrap();
        let c = gusty().field(10.0, 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn calm_and_constant() {
        assert_eq!(WindSpec::Calm.field(1.0, 0).unwrap(), WindField::Calm);
        let w = WindSpec::Constant { speed: 3.0, heading: 0.5 }.field(1.0, 0).unwrap();
        assert_eq!(w.at(0.7), WindSample { speed: 3.0, heading: 0.5 });
        assert!(WindSpec::Constant { speed: -1.0, heading: 0.0 }.field(1.0, 0).is_err());
    }
}
