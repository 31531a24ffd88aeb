use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use vehctl::harness::report::{self, summary_lines, trace_file_name, write_summary};
use vehctl::harness::{self, load_table, parse_value, RunOptions, Scenario};
use vehctl::mpc::CostMode;
use vehctl::pid::PidGains;
use vehctl::Error;

#[derive(Parser)]
#[command(name = "vehctl", version, about = "Closed-loop vehicle control scenarios")]
struct Cli {
    /// Scenario file (TOML).
    #[arg(long, global = true, default_value = "scenarios/double_lane_change.toml")]
    scenario: PathBuf,
    /// Override the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Only report errors.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tune the PID speed controller with PSO and print the gains.
    Tune,
    /// Run the scenario once.
    Run {
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        /// Tune the PID gains first.
        #[arg(long)]
        tune: bool,
        /// Record QP solve times in the trace.
        #[arg(long)]
        timing: bool,
    },
    /// Run the standard and the enhanced cost side by side.
    Compare {
        #[arg(long)]
        tune: bool,
        #[arg(long)]
        timing: bool,
    },
    /// Run the scenario once per value of a dotted key, e.g. `mpc.beta`.
    Sweep {
        #[arg(long)]
        key: String,
        /// Comma-separated values, parsed as TOML.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Standard,
    Enhanced,
}

impl From<Mode> for CostMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Standard => CostMode::Standard,
            Mode::Enhanced => CostMode::Enhanced,
        }
    }
}

enum Failure {
    Invalid(String),
    Aborted(String),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io { .. } | Error::Csv { .. } => Failure::Io(e.to_string()),
            other => Failure::Invalid(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Aborted(msg)) => {
            eprintln!("simulation aborted: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("i/o error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn load(cli: &Cli) -> Result<Scenario, Failure> {
    let mut scenario = Scenario::load(&cli.scenario)?;
    if let Some(seed) = cli.seed {
        scenario.seed = seed;
    }
    Ok(scenario)
}

fn create_out(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))
}

fn say(cli: &Cli, text: &str) {
    if !cli.quiet {
        println!("{text}");
    }
}

fn tuned_gains(cli: &Cli, scenario: &Scenario, force: bool) -> Result<PidGains<f64>, Failure> {
    if !(force || scenario.pid.tune) {
        return Ok(scenario.gains());
    }
    let tuning = harness::tune_gains(scenario)?;
    create_out(&cli.out)?;
    tuning.result.write_history_csv(&cli.out.join("pso_history.csv"))?;
    let g = tuning.gains;
    say(cli, &format!("tuned gains kp={} ki={} kd={} (speed MSE {:.4e})", g.kp, g.ki, g.kd, tuning.mse));
    Ok(g)
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Tune => {
            let scenario = load(cli)?;
            let g = tuned_gains(cli, &scenario, true)?;
            let lines = vec![format!("kp={}", g.kp), format!("ki={}", g.ki), format!("kd={}", g.kd)];
            write_summary(&cli.out.join("gains.txt"), &lines)?;
            Ok(())
        }
        Command::Run { mode, tune, timing } => {
            let scenario = load(cli)?;
            let gains = tuned_gains(cli, &scenario, *tune)?;
            let opts = RunOptions {
                cost_mode: mode.map(Into::into),
                gains: Some(gains),
                timing: *timing,
            };
            let result = harness::run(&scenario, &opts)?;
            create_out(&cli.out)?;
            harness::export_csv(&result.trace, &cli.out.join(trace_file_name(&result)))?;
            let mut lines = vec![format!("scenario={}", scenario.name), format!("seed={}", scenario.seed)];
            lines.extend(summary_lines("run", &result.summary));
            write_summary(&cli.out.join("summary.txt"), &lines)?;
            say(cli, &lines.join("\n"));
            match result.abort_reason {
                Some(reason) => Err(Failure::Aborted(reason)),
                None => Ok(()),
            }
        }
        Command::Compare { tune, timing } => {
            let scenario = load(cli)?;
            let gains = tuned_gains(cli, &scenario, *tune)?;
            let cmp = report::compare(&scenario, gains, *timing)?;
            cmp.write(&cli.out)?;
            say(cli, cmp.table().trim_end());
            let aborted = [&cmp.standard, &cmp.enhanced]
                .iter()
                .filter_map(|r| r.abort_reason.clone())
                .collect::<Vec<_>>();
            if aborted.is_empty() {
                Ok(())
            } else {
                Err(Failure::Aborted(aborted.join("; ")))
            }
        }
        Command::Sweep { key, values } => {
            let mut base = load_table(&cli.scenario)?;
            if let Some(seed) = cli.seed {
                harness::set_key(&mut base, "seed", parse_value(&seed.to_string()))?;
            }
            let values: Vec<_> = values.iter().map(|v| parse_value(v.trim())).collect();
            let points = harness::sweep(&base, key, &values, &RunOptions::default());
            let mut lines = Vec::new();
            let mut failure = None;
            for p in points {
                match p.outcome {
                    Ok(s) => {
                        let prefix = format!("{key}={}", p.value);
                        lines.push(format!(
                            "{prefix} speed_mse={} position_mse={} heading_mse={} max_lateral_error={} violations={} fallbacks={} aborted={}",
                            s.speed_mse,
                            s.position_mse,
                            s.heading_mse,
                            s.max_lateral_error,
                            s.constraint_violations,
                            s.fallbacks,
                            s.aborted
                        ));
                    }
                    Err(e) => {
                        lines.push(format!("{key}={} error={e}", p.value));
                        failure.get_or_insert(Failure::from(e));
                    }
                }
            }
            create_out(&cli.out)?;
            write_summary(&cli.out.join("sweep.txt"), &lines)?;
            say(cli, &lines.join("\n"));
            failure.map_or(Ok(()), Err)
        }
    }
}
