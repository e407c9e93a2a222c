use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn mixedarea(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mixedarea")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("mixedarea-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn mi_check_reports_verdict_and_worst_node() {
    let out = mixedarea(&["mi-check", "--f", "poly:\"x1^2 - x2^2\"", "--n", "3", "--i", "1", "--grid", "8192"]);
    assert_eq!(out.status.code(), Some(1));
    let v = json(&out);
    assert_eq!(v["result"]["verdict"], "violated");
    assert_eq!(v["result"]["worst_node"].as_array().unwrap().len(), 3);
    assert!(v.get("timestamp").is_none());
}

#[test]
fn support_function_segment_is_concave() {
    let out = mixedarea(&[
        "bm-test", "--f", "support:ellipsoid:1,2,3", "--i", "2", "--K", "ball:1", "--L", "ellipsoid:1,1,4", "--t", "21",
        "--grid", "2048",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["result"]["concave"], true);
    assert_eq!(v["result"]["t_samples"].as_array().unwrap().len(), 21);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(mixedarea(&["mi-check", "--bogus"]).status.code(), Some(2));
    assert_eq!(mixedarea(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(mixedarea(&["mi-check", "--f", "poly:x1", "--i", "3"]).status.code(), Some(2));
    assert_eq!(mixedarea(&["mi-check", "--f", "cube:1", "--i", "1"]).status.code(), Some(2));
    let cfg = scratch("bad.conf");
    std::fs::write(&cfg, "colour = blue\n").unwrap();
    let out = mixedarea(&["mi-check", "--f", "poly:x1", "--i", "1", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown key"));
}

#[test]
fn flags_override_config_file() {
    let cfg = scratch("grid.conf");
    std::fs::write(&cfg, "grid = 1024\ntol = 1e-6\n").unwrap();
    let base = ["mi-check", "--f", "support:ball:1", "--i", "2", "--config", cfg.to_str().unwrap()];
    let v = json(&mixedarea(&base));
    assert_eq!(v["inputs"]["grid"], 1024);
    assert_eq!(v["result"]["tolerance"], 1e-6);
    let mut args = base.to_vec();
    args.extend(["--grid", "512"]);
    assert_eq!(json(&mixedarea(&args))["inputs"]["grid"], 512);
}

#[test]
fn output_is_byte_identical_across_runs() {
    let args = ["mono-test", "--f", "poly:1 + x1^2", "--i", "2", "--grid", "1024", "--pairs", "4", "--seed", "0x2a"];
    let (a, b) = (mixedarea(&args), mixedarea(&args));
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn out_and_csv_files_are_written() {
    let (out, csv) = (scratch("eval.json"), scratch("mi.csv"));
    let status = mixedarea(&["eval", "--f", "const:1", "--i", "2", "--K", "ball:1", "--grid", "1024", "--out", out.to_str().unwrap()]);
    assert_eq!(status.status.code(), Some(0));
    assert!(status.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let value = v["result"]["value"].as_f64().unwrap();
    assert!((value - 4.0 * std::f64::consts::PI).abs() < 1e-8);
    for key in ["value", "error_estimate", "grid", "convention_factor"] {
        assert!(v["result"].get(key).is_some(), "missing {key}");
    }
    let status = mixedarea(&["mi-check", "--f", "support:ball:1", "--i", "1", "--grid", "512", "--csv", csv.to_str().unwrap()]);
    assert!(status.status.success());
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("order,verdict,worst_value,worst_node"));
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn hunt_success_exits_zero() {
    let out = mixedarea(&["mono-hunt", "--f", "poly:0.5 - x1^2 + 0.4*x2^2", "--i", "2", "--grid", "4096"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["status"], "found");
    assert!(v["result"]["gap"]["value"].as_f64().unwrap() > v["result"]["tolerance"].as_f64().unwrap());
    // Nothing to find when (M)_i holds.
    let out = mixedarea(&["mono-hunt", "--f", "support:ball:1", "--i", "2", "--grid", "1024"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["status"], "not-found");
}

#[test]
fn mollified_constant_passes() {
    let out = mixedarea(&["mollify", "--f", "const:2", "--k", "8", "--samples", "200", "--check-mi", "2", "--grid", "512"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(json(&out)["result"]["sup_distance"].as_f64().unwrap() < 1e-12);
}

#[test]
fn cylinder_check_matches_closed_form() {
    let out = mixedarea(&["cylinder-check", "--K1", "disc:1", "--R", "1", "--deltas", "0.05,0.02,0.01"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rhs = json(&out)["result"]["rhs"].as_f64().unwrap();
    assert!((rhs - 3.0 * std::f64::consts::PI).abs() < 1e-9);
}

#[test]
fn small_corpus_round_trip() {
    let out = mixedarea(&["corpus", "--seed", "0xC0FFEE", "--size", "2", "--grid", "2048", "--pairs", "4"]);
    let v = json(&out);
    assert_eq!(v["result"]["records"].as_array().unwrap().len(), 2 + 3);
    assert_eq!(v["result"]["agreed"], v["result"]["compared"]);
    assert_eq!(out.status.code(), Some(0));
}
