use std::path::{Path, PathBuf};

use vehctl::harness::sim::CONTROL_PERIOD;
use vehctl::harness::{self, export_csv, read_csv, RunOptions, Scenario, Summary, CSV_HEADER};
use vehctl::lpv::SPEED_FLOOR;
use vehctl::mpc::CostMode;
use vehctl::Error;

fn scenario_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn load(name: &str) -> Scenario {
    Scenario::load(&scenario_path(name)).unwrap()
}

fn run(s: &Scenario) -> harness::ScenarioResult {
    harness::run(s, &RunOptions::default()).unwrap()
}

#[test]
fn shipped_scenarios_load_and_round_trip() {
    for name in ["double_lane_change.toml", "general_track.toml", "straight.toml"] {
        let s = load(name);
        let again = Scenario::from_toml_str(&s.to_toml_string().unwrap()).unwrap();
        assert_eq!(again, s, "{name}");
    }
}

#[test]
fn csv_round_trip_reproduces_metrics() {
    let res = run(&load("double_lane_change.toml"));
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("trace.csv");
    export_csv(&res.trace, &p).unwrap();
    let text = std::fs::read_to_string(&p).unwrap();
    assert_eq!(text.lines().next().unwrap(), CSV_HEADER.join(","));
    let back = read_csv(&p).unwrap();
    assert_eq!(back.len(), res.trace.len());
    let again = Summary::from_trace(&back);
    let s = res.summary;
    for (a, b) in [
        (again.speed_mse, s.speed_mse),
        (again.position_mse, s.position_mse),
        (again.heading_mse, s.heading_mse),
        (again.max_lateral_error, s.max_lateral_error),
    ] {
        assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
    }
}

#[test]
fn runs_are_deterministic_and_seeded() {
    let s = load("double_lane_change.toml");
    let a = run(&s);
    let b = run(&s);
    assert_eq!(a.trace, b.trace);
    let mut other = s.clone();
    other.seed += 1;
    assert_ne!(run(&other).trace, a.trace);
}

#[test]
fn straight_road_is_tracked_exactly() {
    let res = run(&load("straight.toml"));
    assert!(!res.summary.aborted);
    assert!(res.summary.position_mse < 1e-6);
    assert!(res.summary.heading_mse < 1e-6);
    assert!(res.summary.speed_mse < 1e-3);
}

#[test]
fn trace_rows_are_evenly_spaced() {
    let s = load("double_lane_change.toml");
    let res = run(&s);
    assert_eq!(res.trace.len(), (s.duration / CONTROL_PERIOD).round() as usize);
    for (k, r) in res.trace.iter().enumerate() {
        assert_eq!(r.t, k as f64 * CONTROL_PERIOD);
        assert_eq!(r.solve_ms, 0.0);
    }
}

#[test]
fn stiffness_estimates_converge_while_cornering() {
    let mut s = load("double_lane_change.toml");
    s.noise.force_sigma = 0.0;
    s.noise.slip_sigma = 0.0;
    let res = run(&s);
    let (cf, cr) = (s.vehicle.cf_true(), s.vehicle.cr_true());
    // after the first transition the slips carry enough excitation
    let late: Vec<_> = res.lateral.iter().filter(|l| l.x > 120.0).collect();
    assert!(!late.is_empty());
    for l in late {
        assert!((l.estimate[0] - cf).abs() < 0.05 * cf, "c_f {} at x = {}", l.estimate[0], l.x);
        assert!((l.estimate[1] - cr).abs() < 0.05 * cr, "c_r {} at x = {}", l.estimate[1], l.x);
    }
}

#[test]
fn model_is_rescheduled_every_cycle() {
    let res = run(&load("general_track.toml"));
    for l in &res.lateral {
        assert_eq!(l.scheduled_v_x, l.v_x.max(SPEED_FLOOR));
        assert_eq!(l.scheduled_cf, l.estimate[0]);
        assert!((l.scheduled_cr - l.estimate[1]).abs() <= 1e-9 * l.estimate[1]);
    }
}

#[test]
fn trace_steering_is_the_mpc_command_held() {
    let res = run(&load("double_lane_change.toml"));
    let every = res.trace.len() / res.lateral.len();
    assert_eq!(every, 10);
    for (k, row) in res.trace.iter().enumerate() {
        let sample = &res.lateral[k / every];
        assert_eq!(row.delta_f, sample.command);
        if k % every == 0 {
            assert_eq!(row.t, sample.t);
            assert!(row.delta_f.abs() <= sample.steer_limit);
        }
    }
}

#[test]
fn enhanced_beats_standard_on_the_lane_change() {
    let s = load("double_lane_change.toml");
    let cmp = harness::compare(&s, s.gains(), false).unwrap();
    assert_eq!(cmp.standard.mode, CostMode::Standard);
    assert_eq!(cmp.enhanced.mode, CostMode::Enhanced);
    assert!(cmp.enhanced.summary.position_mse < cmp.standard.summary.position_mse);
    assert!(cmp.enhanced.summary.heading_mse < cmp.standard.summary.heading_mse);
    let table = cmp.table();
    assert!(table.contains("E-MPC"));
}

#[test]
fn sweep_keeps_input_order_and_reports_bad_values() {
    let base = harness::load_table(&scenario_path("straight.toml")).unwrap();
    let values: Vec<_> = ["2.0", "3.5", "0.5"].iter().map(|v| harness::parse_value(v)).collect();
    let points = harness::sweep(&base, "mpc.beta", &values, &RunOptions::default());
    assert_eq!(points.len(), 3);
    for (p, v) in points.iter().zip(&values) {
        assert_eq!(&p.value, v);
    }
    assert!(points[0].outcome.is_ok() && points[1].outcome.is_ok());
    // beta below one is rejected by the enhanced cost
    assert!(matches!(points[2].outcome, Err(Error::Scenario(_))));
}

#[test]
fn bad_documents_are_rejected() {
    let text = std::fs::read_to_string(scenario_path("straight.toml")).unwrap();
    let wrong_version = text.replace("format_version = 1", "format_version = 2");
    assert!(matches!(Scenario::from_toml_str(&wrong_version), Err(Error::Scenario(_))));
    let unknown = format!("{text}\nsurprise = 1\n");
    assert!(Scenario::from_toml_str(&unknown).is_err());
    let negative = text.replace("duration = 10.0", "duration = -1.0");
    assert_ne!(negative, text);
    assert!(Scenario::from_toml_str(&negative).is_err());
}
