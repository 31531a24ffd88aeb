use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn vehctl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vehctl")).args(args).output().unwrap()
}

#[test]
fn compare_twice_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario("double_lane_change.toml");
    let mut outs = Vec::new();
    for k in ["a", "b"] {
        let out = dir.path().join(k);
        let o = vehctl(&["compare", "--scenario", s.to_str().unwrap(), "--out", out.to_str().unwrap(), "--quiet"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(o.stdout.is_empty());
        outs.push(out);
    }
    for f in ["mpc.csv", "empc.csv", "summary.txt"] {
        let a = std::fs::read(outs[0].join(f)).unwrap();
        let b = std::fs::read(outs[1].join(f)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b, "{f}");
    }
}

#[test]
fn run_writes_trace_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario("straight.toml");
    let o = vehctl(&[
        "run",
        "--scenario",
        s.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--mode",
        "standard",
        "--seed",
        "3",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = std::fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert!(summary.contains("seed=3"));
    assert!(summary.contains("run.aborted=false"));
    let trace = std::fs::read_to_string(dir.path().join("straight_mpc.csv")).unwrap();
    assert_eq!(trace.lines().count(), 1001);
}

#[test]
fn sweep_lists_every_value() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario("straight.toml");
    let o = vehctl(&[
        "sweep",
        "--scenario",
        s.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--key",
        "mpc.r",
        "--values",
        "1.0,2.5",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("sweep.txt")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("mpc.r=1.0 ") && lines[1].starts_with("mpc.r=2.5 "));
}

#[test]
fn invalid_scenario_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "format_version = 1\nname = \"x\"\nduration = -3.0\n").unwrap();
    let o = vehctl(&["run", "--scenario", bad.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!o.stderr.is_empty());
}

#[test]
fn missing_scenario_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let o = vehctl(&["run", "--scenario", dir.path().join("nope.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn usage_errors_and_help() {
    assert_eq!(vehctl(&["--help"]).status.code(), Some(0));
    assert_eq!(vehctl(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(vehctl(&["run", "--mode", "fast"]).status.code(), Some(1));
}
