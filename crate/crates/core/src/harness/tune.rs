//! PID tuning for a scenario and one-key parameter sweeps.

use rayon::prelude::*;

use super::scenario::{set_key, Scenario};
use super::sim::{run, RunOptions, Summary};
use crate::error::Result;
use crate::pid::SpeedTrackingTask;
use crate::pso::{tune_pid, PidTuning};

/// Straight-line speed tracking of the scenario's profile, in the scenario's
/// environment.
pub fn speed_task(scenario: &Scenario) -> Result<SpeedTrackingTask<f64>> {
    Ok(SpeedTrackingTask::new(scenario.plant()?, scenario.speed.clone(), scenario.duration))
}

pub fn tune_gains(scenario: &Scenario) -> Result<PidTuning<f64>> {
    tune_pid(&speed_task(scenario)?, &scenario.pso_config())
}

#[derive(Debug)]
pub struct SweepPoint {
    pub value: toml::Value,
    pub outcome: Result<Summary>,
}

/// Runs the scenario document once per value of the dotted `key`, in
/// parallel; points come back in input order.
pub fn sweep(base: &toml::Table, key: &str, values: &[toml::Value], opts: &RunOptions) -> Vec<SweepPoint> {
    values
        .par_iter()
        .map(|value| {
            let outcome = (|| {
                let mut doc = base.clone();
                set_key(&mut doc, key, value.clone())?;
                let scenario = Scenario::from_table(doc)?;
                Ok(run(&scenario, opts)?.summary)
            })();
            SweepPoint {
                value: value.clone(),
                outcome,
            }
        })
        .collect()
}
