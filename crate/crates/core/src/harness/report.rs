//! CSV traces, the cost-mode comparison, and summary output.

use std::fmt::Write as _;
use std::path::Path;

use super::scenario::Scenario;
use super::sim::{run, RunOptions, ScenarioResult, Summary, TraceRow};
use crate::error::{Error, Result};
use crate::mpc::CostMode;
use crate::pid::PidGains;

pub const CSV_HEADER: [&str; 17] = [
    "t",
    "v_ref",
    "v",
    "throttle",
    "brake",
    "delta_f",
    "y_ref",
    "y",
    "psi_ref",
    "psi",
    "cf_hat",
    "cr_hat",
    "wind_speed",
    "wind_heading",
    "mpc_cost",
    "mpc_slack",
    "solve_ms",
];

fn csv_error(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn io_error(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes the header and one row per trace sample.
pub fn export_csv(trace: &[TraceRow], path: &Path) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(csv_error(path))?;
    w.write_record(CSV_HEADER).map_err(csv_error(path))?;
    for row in trace {
        w.serialize(row).map_err(csv_error(path))?;
    }
    w.flush().map_err(io_error(path))
}

pub fn read_csv(path: &Path) -> Result<Vec<TraceRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_error(path))?;
    let header = r.headers().map_err(csv_error(path))?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::Scenario(format!("{} does not carry the trace header", path.display())));
    }
    r.deserialize().collect::<std::result::Result<_, _>>().map_err(csv_error(path))
}

fn mode_name(mode: CostMode) -> &'static str {
    match mode {
        CostMode::Standard => "mpc",
        CostMode::Enhanced => "empc",
    }
}

/// `key=value` lines describing one run.
pub fn summary_lines(prefix: &str, s: &Summary) -> Vec<String> {
    vec![
        format!("{prefix}.speed_mse={}", s.speed_mse),
        format!("{prefix}.position_mse={}", s.position_mse),
        format!("{prefix}.heading_mse={}", s.heading_mse),
        format!("{prefix}.max_lateral_error={}", s.max_lateral_error),
        format!("{prefix}.constraint_violations={}", s.constraint_violations),
        format!("{prefix}.fallbacks={}", s.fallbacks),
        format!("{prefix}.mpc_steps={}", s.mpc_steps),
        format!("{prefix}.aborted={}", s.aborted),
    ]
}

pub fn write_summary(path: &Path, lines: &[String]) -> Result<()> {
    let mut text = lines.join("\n");
    text.push('\n');
    std::fs::write(path, text).map_err(io_error(path))
}

/// The same scenario driven by the standard and the enhanced cost.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub scenario: String,
    pub seed: u64,
    pub gains: PidGains<f64>,
    pub standard: ScenarioResult,
    pub enhanced: ScenarioResult,
}

/// Lateral error target for the enhanced controller [m].
pub const LATERAL_ERROR_TARGET: f64 = 0.1;

pub fn compare(scenario: &Scenario, gains: PidGains<f64>, timing: bool) -> Result<Comparison> {
    let opts = |mode| RunOptions {
        cost_mode: Some(mode),
        gains: Some(gains),
        timing,
    };
    let standard = run(scenario, &opts(CostMode::Standard))?;
    let enhanced = run(scenario, &opts(CostMode::Enhanced))?;
    Ok(Comparison {
        scenario: scenario.name.clone(),
        seed: scenario.seed,
        gains,
        standard,
        enhanced,
    })
}

impl Comparison {
    pub fn table(&self) -> String {
        let (a, b) = (&self.standard.summary, &self.enhanced.summary);
        let mut out = String::new();
        let _ = writeln!(out, "scenario {} (seed {})", self.scenario, self.seed);
        let _ = writeln!(
            out,
            "pid gains kp={} ki={} kd={}",
            self.gains.kp, self.gains.ki, self.gains.kd
        );
        let _ = writeln!(out, "{:<24}{:>14}{:>14}", "metric", "MPC", "E-MPC");
        let rows = [
            ("speed MSE [m2/s2]", a.speed_mse, b.speed_mse),
            ("position MSE [m2]", a.position_mse, b.position_mse),
            ("heading MSE [rad2]", a.heading_mse, b.heading_mse),
            ("max lateral error [m]", a.max_lateral_error, b.max_lateral_error),
        ];
        for (name, x, y) in rows {
            let _ = writeln!(out, "{name:<24}{x:>14.4e}{y:>14.4e}");
        }
        let counts = [
            ("constraint violations", a.constraint_violations, b.constraint_violations),
            ("fallbacks", a.fallbacks, b.fallbacks),
        ];
        for (name, x, y) in counts {
            let _ = writeln!(out, "{name:<24}{x:>14}{y:>14}");
        }
        let target = if b.max_lateral_error < LATERAL_ERROR_TARGET { "met" } else { "missed" };
        let _ = writeln!(
            out,
            "E-MPC max lateral error target {LATERAL_ERROR_TARGET} m: {target}"
        );
        out
    }

    pub fn summary_lines(&self) -> Vec<String> {
        let mut lines = vec![
            format!("scenario={}", self.scenario),
            format!("seed={}", self.seed),
            format!("kp={}", self.gains.kp),
            format!("ki={}", self.gains.ki),
            format!("kd={}", self.gains.kd),
        ];
        lines.extend(summary_lines(mode_name(CostMode::Standard), &self.standard.summary));
        lines.extend(summary_lines(mode_name(CostMode::Enhanced), &self.enhanced.summary));
        lines
    }

    /// Writes `mpc.csv`, `empc.csv` and `summary.txt` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(io_error(dir))?;
        export_csv(&self.standard.trace, &dir.join("mpc.csv"))?;
        export_csv(&self.enhanced.trace, &dir.join("empc.csv"))?;
        write_summary(&dir.join("summary.txt"), &self.summary_lines())
    }
}

/// File stem used for a single run's trace.
pub fn trace_file_name(result: &ScenarioResult) -> String {
    format!("{}_{}.csv", result.name, mode_name(result.mode))
}
