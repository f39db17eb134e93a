use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lab")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, text).unwrap();
    path
}

const EXPANDER: &str = r#"{
  "schema_version": 1,
  "scenarios": [
    {
      "name": "hyperbolic_expander",
      "model": { "kind": "hyperbolic", "scale": 1.0 },
      "t_span": [0.0, 10.0],
      "checks": ["entropy", "harnack", "mu_nu", "reduced", "theta", "asymptotics", "blowdown"]
    }
  ]
}"#;

const MIXED: &str = r#"{
  "schema_version": 1,
  "scenarios": [
    { "name": "nil", "model": { "kind": "heisenberg" }, "t_span": [0, 20], "samples": 8,
      "checks": ["entropy", "blowdown"] },
    { "name": "torus", "model": { "kind": "torus", "grid": [8, 8], "modes": [{ "amplitude": 0.2, "kx": 1, "ky": 1 }] },
      "t_span": [0, 0.02], "samples": 5, "checks": ["entropy", "blowdown"] }
  ]
}"#;

fn run(config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    lab(&args)
}

fn report(out: &Path, scenario: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join(scenario).join("report.json")).unwrap()).unwrap()
}

#[test]
fn hyperbolic_expander_passes_with_constant_w_plus() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let result = run(&write_config(dir.path(), EXPANDER), &out, &[]);
    assert_eq!(result.status.code(), Some(0), "{}", String::from_utf8_lossy(&result.stdout));

    let r = report(&out, "hyperbolic_expander");
    assert_eq!(r["passed"], Value::Bool(true));
    let checks = r["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 7);
    for c in checks {
        assert!(c["tolerance"].as_f64().unwrap() > 0.0);
        for (name, v) in c["verdicts"].as_object().unwrap() {
            assert_eq!(v, &Value::Bool(true), "{} / {name}", c["check"]);
        }
    }
    let entropy = checks.iter().find(|c| c["check"] == "entropy").unwrap();
    assert_eq!(entropy["flags"]["w_plus_constant"], Value::Bool(true));
    assert_eq!(entropy["verdicts"]["w_plus_nondecreasing"], Value::Bool(true));

    for file in ["series/entropy.csv", "series/theta_plus.csv", "series/reduced.csv", "plots/w_plus.svg", "plots/theta_plus.svg"] {
        assert!(out.join("hyperbolic_expander").join(file).is_file(), "{file} missing");
    }
    let svg = fs::read_to_string(out.join("hyperbolic_expander/plots/scaled_volume.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("<polyline"));
}

#[test]
fn malformed_json_exits_2_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let result = run(&write_config(dir.path(), "{\n  \"schema_version\": 1,\n  \"scenarios\": [\n"), &out, &[]);
    assert_eq!(result.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&result.stderr).contains("line "));
    assert!(!out.exists());
}

#[test]
fn invalid_scenario_is_a_line_anchored_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    // the second scenario is broken; the valid first one must not be written either
    let bad = MIXED.replace("\"grid\": [8, 8]", "\"grid\": [8, 2]");
    let result = run(&write_config(dir.path(), &bad), &out, &[]);
    assert_eq!(result.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&result.stderr);
    assert!(stderr.contains("line 6") && stderr.contains("torus"), "{stderr}");
    assert!(!out.exists());

    let missing = dir.path().join("nope.json");
    assert_eq!(run(&missing, &out, &[]).status.code(), Some(2));
}

#[test]
fn repeated_runs_are_bitwise_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), MIXED);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(run(&config, &a, &["--threads", "1"]).status.code(), Some(0));
    assert_eq!(run(&config, &b, &["--threads", "2"]).status.code(), Some(0));
    for rel in ["nil/series/entropy.csv", "nil/series/blowdown.csv", "torus/series/entropy.csv", "nil/report.json", "torus/report.json"] {
        assert_eq!(fs::read(a.join(rel)).unwrap(), fs::read(b.join(rel)).unwrap(), "{rel} differs");
    }
}

#[test]
fn numerical_failures_give_partial_reports_and_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = MIXED.replace("\"checks\": [\"entropy\", \"blowdown\"] },", "\"checks\": [\"entropy\", \"reduced\"] },");
    let result = run(&write_config(dir.path(), &cfg), &out, &[]);
    assert_eq!(result.status.code(), Some(1));
    let r = report(&out, "nil");
    assert_eq!(r["passed"], Value::Bool(false));
    let checks = r["checks"].as_array().unwrap();
    assert_eq!(checks[0]["passed"], Value::Bool(true));
    assert!(checks[1]["error"].as_str().unwrap().contains("unsupported"));
    assert!(out.join("nil/series/entropy.csv").is_file());
    assert_eq!(report(&out, "torus")["passed"], Value::Bool(true));
}

#[test]
fn list_and_accept() {
    let listed = lab(&["list"]);
    assert_eq!(listed.status.code(), Some(0));
    let text = String::from_utf8_lossy(&listed.stdout);
    for id in ["entropy", "harnack", "mu_nu", "reduced", "theta", "asymptotics", "blowdown"] {
        assert!(text.contains(id));
    }

    let accepted = lab(&["accept", "--suite", "fast", "--only", "1,9"]);
    assert_eq!(accepted.status.code(), Some(0));
    let text = String::from_utf8_lossy(&accepted.stdout);
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS [")).count(), 2, "{text}");

    assert_eq!(lab(&["accept", "--suite", "fast", "--only", "99"]).status.code(), Some(2));
    assert_ne!(lab(&["accept", "--suite", "medium"]).status.code(), Some(0));
}
