use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_curveflow"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn value_after(stdout: &str, key: &str) -> f64 {
    stdout
        .lines()
        .find_map(|l| l.strip_prefix(key).map(|v| v.trim().parse().unwrap()))
        .unwrap_or_else(|| panic!("no {key} in {stdout}"))
}

#[test]
fn concentric_circles_are_one_apart() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    ok(d, &["gen", "circle", "--n", "256", "-o", "a.json"]);
    ok(d, &["gen", "circle", "--n", "256", "--radius", "2", "-o", "b.json"]);
    let out = ok(d, &["frechet", "a.json", "b.json", "--dinf", "--report", "f.json"]);
    assert!((value_after(&out, "distance") - 1.0).abs() < 1e-3);
    assert!((value_after(&out, "dinf") - 1.0).abs() < 1e-3);
    let report: Value = serde_json::from_str(&std::fs::read_to_string(d.join("f.json")).unwrap()).unwrap();
    assert!((report["distance"].as_f64().unwrap() - 1.0).abs() < 1e-3);
}

#[test]
fn gen_to_stdout_is_curve_json_and_deterministic() {
    let tmp = TempDir::new().unwrap();
    let a = ok(tmp.path(), &["gen", "random", "--n", "64", "--seed", "11"]);
    let b = ok(tmp.path(), &["gen", "random", "--n", "64", "--seed", "11"]);
    assert_eq!(a, b);
    let v: Value = serde_json::from_str(&a).unwrap();
    assert_eq!(v["points"].as_array().unwrap().len(), 64);
    for shape in ["ellipse", "rounded-square", "flat-segment", "perturbed-circle", "stadium"] {
        ok(tmp.path(), &["gen", shape, "--n", "64", "-o", &format!("{shape}.csv")]);
    }
}

#[test]
fn heat_flow_csv_tracks_shrinking_circle() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    ok(d, &["gen", "circle", "--n", "256", "-o", "c.json"]);
    let out = ok(d, &["flow", "c.json", "--energy", "length", "--metric", "h0", "--steps", "100", "-o", "run"]);
    assert!(out.contains("metric=H0 j=1 lambda=1"));
    let mut rdr = csv::Reader::from_path(d.join("run/flow.csv")).unwrap();
    let headers: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(headers, ["step", "t", "length", "energy", "step_norm"]);
    let rows: Vec<(usize, f64, f64, f64, f64)> = rdr.deserialize().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 101);
    for w in rows.windows(2) {
        assert!(w[1].2 < w[0].2);
    }
    for (_, t, length, _, _) in &rows {
        let r = length / (2.0 * std::f64::consts::PI);
        assert!((r / (1.0 - 2.0 * t).sqrt() - 1.0).abs() < 0.01);
    }
    assert_eq!(std::fs::read_to_string(d.join("run/trajectory.jsonl")).unwrap().lines().count(), 101);
    assert!(d.join("run/final.json").exists() && d.join("run/run.json").exists());
}

#[test]
fn verify_is_reproducible_and_fails_on_corrupted_slack() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let args = ["verify", "--seed", "7", "--draws", "120", "--sandwich-draws", "200", "--n", "128"];
    ok(d, &[&args[..], &["-o", "v1.json"]].concat());
    ok(d, &[&args[..], &["-o", "v2.json"]].concat());
    let a = std::fs::read(d.join("v1.json")).unwrap();
    assert_eq!(a, std::fs::read(d.join("v2.json")).unwrap());
    let v: Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(v["passed"], Value::Bool(true));
    assert_eq!(v["reports"].as_array().unwrap().len(), 6);

    let bad = run(d, &[&args[..], &["--slack=-1", "-o", "v3.json"]].concat());
    assert_eq!(bad.status.code(), Some(1));
    let diag: Value = serde_json::from_slice(&bad.stderr).unwrap();
    assert_eq!(diag["error"], "verification_failed");
}

#[test]
fn usage_errors_exit_with_two() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    assert_eq!(run(d, &["dist"]).status.code(), Some(2));
    assert_eq!(run(d, &["bogus"]).status.code(), Some(2));
    assert_eq!(run(d, &["gen", "circle", "--n", "7"]).status.code(), Some(2));
    assert_eq!(run(d, &["frechet", "missing.json", "also.json"]).status.code(), Some(2));
    std::fs::write(d.join("bad.json"), r#"{"dim": 2, "points": [[0, 0]]}"#).unwrap();
    assert_eq!(run(d, &["flow", "bad.json"]).status.code(), Some(2));
    let out = Command::new(env!("CARGO_BIN_EXE_curveflow"))
        .current_dir(d)
        .env("CURVEFLOW_THREADS", "zero")
        .args(["gen", "circle"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn flow_failure_exits_with_one_and_diagnostic() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    ok(d, &["gen", "perturbed-circle", "--n", "64", "-o", "p.json"]);
    // A huge fixed step under H0 folds the curve back.
    let out = run(
        d,
        &["flow", "p.json", "--metric", "h0", "--conformal", "off", "--fixed", "--dt", "5", "--steps", "20", "-o", "f"],
    );
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    let diag: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(diag["error"], "flow_failed");
    assert!(d.join("f/flow.csv").exists());
}

#[test]
fn dist_reports_bounds_and_threads_env_is_honored() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    ok(d, &["gen", "random", "--n", "32", "--seed", "1", "-o", "a.json"]);
    ok(d, &["gen", "random", "--n", "32", "--seed", "2", "-o", "b.json"]);
    let out = Command::new(env!("CARGO_BIN_EXE_curveflow"))
        .current_dir(d)
        .env("CURVEFLOW_THREADS", "1")
        .args([
            "dist", "a.json", "b.json", "--metric", "hj-tilde", "--lambda", "0.25", "--k-rows", "8",
            "--max-iter", "3", "--band", "2", "--shifts", "1", "--report", "r.json", "--path-out", "p.jsonl",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("# dist metric=HjTilde j=1 lambda=0.25"));
    let r: Value = serde_json::from_str(&std::fs::read_to_string(d.join("r.json")).unwrap()).unwrap();
    let dist = r["distance"].as_f64().unwrap();
    assert!(dist <= r["linear_length"].as_f64().unwrap() + 1e-12);
    assert!(r["frechet_margin"].as_f64().unwrap() >= -1e-3);
    assert_eq!(r["lipschitz"]["holds"], Value::Bool(true));
    assert_eq!(std::fs::read_to_string(d.join("p.jsonl")).unwrap().lines().count(), 9);
}

#[test]
fn grad_and_smooth_write_results() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    ok(d, &["gen", "rounded-square", "--n", "128", "-o", "s.json"]);
    let out = ok(d, &["grad", "s.json", "--energy", "elastic", "--metric", "hj", "--j", "2", "--lambda", "0.01", "-o", "g2.json"]);
    assert!(out.contains("j=2 lambda=0.01"));
    let g: Value = serde_json::from_str(&std::fs::read_to_string(d.join("g2.json")).unwrap()).unwrap();
    assert_eq!(g["gradient"].as_array().unwrap().len(), 128);
    ok(d, &["gen", "random", "--n", "128", "--seed", "4", "-o", "r.json"]);
    ok(d, &["grad", "r.json", "--energy", "std-dev", "--metric", "hj", "--lambda", "0.5", "-o", "g1.json"]);
    let g: Value = serde_json::from_str(&std::fs::read_to_string(d.join("g1.json")).unwrap()).unwrap();
    assert!(g["duality"]["rel_err"].as_f64().unwrap() < 1e-8);

    ok(d, &["smooth", "s.json", "--method", "direction", "--cutoff", "8", "-o", "dir"]);
    let s: Value = serde_json::from_str(&std::fs::read_to_string(d.join("dir/summary.json")).unwrap()).unwrap();
    assert!(s["max_defect"].as_f64().unwrap() < 1e-10);
    assert!(d.join("dir/smooth.json").exists());

    ok(d, &["smooth", "s.json", "--method", "fourier", "--decay", "log2", "--schedule", "0.2,0.1", "-o", "four"]);
    let mut rdr = csv::Reader::from_path(d.join("four/delta.csv")).unwrap();
    assert_eq!(rdr.headers().unwrap().iter().collect::<Vec<_>>(), ["t", "delta", "tail_mass"]);
    let rows: Vec<(f64, f64, f64)> = rdr.deserialize().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[1].1 < rows[0].1);
    assert_eq!(
        run(d, &["smooth", "s.json", "--method", "fourier", "--schedule", "0.1,0.2", "-o", "x"]).status.code(),
        Some(2)
    );
}
