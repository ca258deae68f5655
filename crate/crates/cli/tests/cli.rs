use std::path::Path;
use std::process::{Command, Output};

const SMALL: &[&str] = &["--nx", "81", "--ny", "61", "--mesh-spacing", "2", "--residual-spacing", "0.5", "--speed", "1"];

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_skinstretch")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn simulate(extra: &[&str]) -> Output {
    let mut args = vec!["simulate"];
    args.extend_from_slice(SMALL);
    args.extend_from_slice(extra);
    run(&args)
}

#[test]
fn synth_then_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let field = dir.path().join("forehead.csv");
    let depth = dir.path().join("depth.csv");
    let out = run(&["synth", "-o", field.to_str().unwrap(), "--nx", "81", "--ny", "61"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let out = run(&["metrics", field.to_str().unwrap(), "--depth-output", depth.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["count"].as_u64().unwrap() >= 3);
    assert!(depth.is_file());
}

#[test]
fn simulate_writes_and_renders() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().join("case");
    let out = simulate(&["-o", o.to_str().unwrap(), "--render", "--set", "load.ld=2.5"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["config"]["load"]["ld"], 2.5);
    assert_eq!(report["converged"], true);
    for name in ["report.json", "report.csv", "trace.csv", "sigma_y.png", "residual_depth.png"] {
        assert!(o.join(name).is_file(), "{name} missing");
    }
    std::fs::remove_file(o.join("sigma_x.png")).unwrap();
    let out = run(&["render", o.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert!(o.join("sigma_x.png").is_file());
}

#[test]
fn invalid_configuration_exits_2() {
    assert_eq!(code(&simulate(&["--dfs", "30"])), 2);
    assert_eq!(code(&simulate(&["--set", "load.bogus=1"])), 2);
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[material]\nyoungs_modulus = -1.0\n").unwrap();
    assert_eq!(code(&simulate(&["-c", cfg.to_str().unwrap()])), 2);
}

#[test]
fn unconverged_case_exits_3() {
    assert_eq!(code(&simulate(&["--max-steps", "50"])), 3);
}

#[test]
fn sweep_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["sweep", "--lds", "2,3", "--dfss", "7.58", "-j", "2", "-o", dir.path().to_str().unwrap()];
    args.extend_from_slice(SMALL);
    let out = run(&args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let grid = std::fs::read_to_string(dir.path().join("classification.csv")).unwrap();
    assert_eq!(grid.lines().count(), 3);
    assert!(Path::new(&dir.path().join("ld2_dfs7.58/report.json")).is_file());
}

#[test]
fn config_file_is_read() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[load]\nld = 1.5\n[wrinkles]\nthreshold = 0.2\n").unwrap();
    let out = simulate(&["-c", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["config"]["load"]["ld"], 1.5);
    assert_eq!(report["config"]["wrinkles"]["threshold"], 0.2);
}
