use std::process::{Command, Output};

fn sketchreg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sketchreg")).args(args).output().expect("spawn sketchreg")
}

#[test]
fn run_writes_trace_to_stdout() {
    let out = sketchreg(&["run", "--problem", "rosenbr", "--n", "20", "--tau", "0.5", "--seed", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("k,"), "unexpected header: {}", text.lines().next().unwrap_or(""));
    assert!(text.lines().count() > 2);
}

#[test]
fn sweep_from_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.cfg");
    std::fs::write(&cfg, "problem = rosenbr:2:20\ntau = 1, 0.5\nsolver = skoffar2, adagrad_norm\nseeds = 0..2\n").unwrap();
    let results = dir.path().join("results.csv");
    let out = sketchreg(&["sweep", cfg.to_str().unwrap(), "--out", results.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&results).unwrap();
    // two SKOFFAR cells plus one baseline cell
    assert_eq!(text.lines().count(), 4, "{text}");
}

#[test]
fn check_single_criterion_passes() {
    let out = sketchreg(&["check", "--only", "6"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn injected_fault_fails_check() {
    let out = sketchreg(&["check", "--only", "1", "--fault", "query-objective", "--seeds", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_flag_exits_one() {
    assert_eq!(sketchreg(&["run", "--no-such-flag"]).status.code(), Some(1));
}

#[test]
fn gauss_newton_rejects_non_least_squares() {
    let out = sketchreg(&["run", "--problem", "arwhead", "--nhat", "4", "--n", "20", "--variant", "skoffar_2b"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("least-squares"));
}
