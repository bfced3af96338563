use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn expflow(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_expflow")).current_dir(dir).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, json: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, json).unwrap();
    path.to_string_lossy().into_owned()
}

fn shipped(name: &str) -> String {
    configs().join(name).to_string_lossy().into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn verify_fb1_records_the_rate() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("run");
    let o = expflow(tmp.path(), &["verify", "--config", &shipped("fb1-skew-rotation.json"), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = report(&out);
    assert_eq!(r["pass"], true);
    assert_eq!(r["certificate"]["constants"]["c"], 0.5);
    assert_eq!(r["tool"]["name"], "expflow");
    assert_eq!(r["tool"]["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(r["rate"]["violations"], 0);
    assert!(r["rate"]["fitted_rate"].as_f64().unwrap() >= 0.45);
    for f in ["certificate.json", "trajectory.csv", "envelope.csv", "plot.gp"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
}

#[test]
fn every_shipped_theorem_config_verifies() {
    for name in ["grad1-scalar.json", "fb2-skew-rotation.json", "grad2-scalar.json"] {
        let tmp = TempDir::new().unwrap();
        let o = expflow(tmp.path(), &["verify", "--quiet", "--config", &shipped(name), "--out", "run"]);
        assert!(o.status.success(), "{name}: {}", stderr(&o));
        assert!(o.stdout.is_empty(), "--quiet printed output");
        assert_eq!(report(&tmp.path().join("run"))["pass"], true, "{name}");
    }
}

#[test]
fn certify_rejection_names_the_inequality() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "bad.json",
        r#"{"problem": "skew-rotation", "system": "fb1", "params": {"alpha": 2, "eta": 1}}"#,
    );
    let o = expflow(tmp.path(), &["certify", "--config", &cfg, "--out", "run"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("α < 2ρβ²λ̲"), "{}", stderr(&o));
    let rejection: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("run/rejection.json")).unwrap()).unwrap();
    assert_eq!(rejection["theorem"], "FB1");
    assert_eq!(rejection["violated"][0]["name"], "α < 2ρβ²λ̲");
    assert!(!tmp.path().join("run/certificate.json").exists());
}

#[test]
fn rerun_clears_stale_results() {
    let tmp = TempDir::new().unwrap();
    let good = write_config(tmp.path(), "good.json", r#"{"problem": "skew-rotation", "system": "fb1", "params": {"alpha": 0.5, "eta": 1}}"#);
    let bad = write_config(tmp.path(), "bad.json", r#"{"problem": "skew-rotation", "system": "fb1", "params": {"alpha": 3, "eta": 1}}"#);
    assert!(expflow(tmp.path(), &["certify", "--config", &good, "--out", "run"]).status.success());
    assert!(!expflow(tmp.path(), &["certify", "--config", &bad, "--out", "run"]).status.success());
    assert!(!tmp.path().join("run/certificate.json").exists());
    assert!(expflow(tmp.path(), &["certify", "--config", &good, "--out", "run"]).status.success());
    assert!(!tmp.path().join("run/rejection.json").exists());
}

#[test]
fn list_shows_the_registry() {
    let tmp = TempDir::new().unwrap();
    let o = expflow(tmp.path(), &["list"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    for name in ["quadratic-2d", "sc-lasso-20d", "skew-rotation"] {
        assert!(text.contains(name), "{name} missing from\n{text}");
    }
    assert!(text.lines().count() >= 4);
}

#[test]
fn distinct_exit_codes() {
    let tmp = TempDir::new().unwrap();
    let unknown = write_config(tmp.path(), "u.json", r#"{"problem": "no-such", "system": "fb1"}"#);
    let incompatible =
        write_config(tmp.path(), "i.json", r#"{"problem": "sc-lasso-20d", "system": "grad2", "params": {}}"#);
    let malformed = write_config(tmp.path(), "m.json", r#"{"problem": "skew-rotation", "system": "fb1", "params": {"alpha": }"#);
    let override_rho = write_config(
        tmp.path(),
        "r.json",
        r#"{"problem": "skew-rotation", "system": "fb1", "params": {"alpha": 0.5, "eta": 1, "beta": 2}}"#,
    );
    for (cfg, code) in [(&unknown, 2), (&incompatible, 3), (&malformed, 4), (&override_rho, 4)] {
        let o = expflow(tmp.path(), &["verify", "--config", cfg, "--out", "run"]);
        assert_eq!(o.status.code(), Some(code), "{cfg}: {}", stderr(&o));
    }
    assert_eq!(expflow(tmp.path(), &["verify"]).status.code(), Some(4));
    assert_eq!(expflow(tmp.path(), &["verify", "--config", "missing.json"]).status.code(), Some(1));
}

#[test]
fn verify_is_byte_for_byte_repeatable() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "lasso.json", r#"{"problem": "sc-lasso-20d", "system": "fb1", "params": {"alpha": 0.05, "eta": 0.05}, "integrator": {"t_end": 30}}"#);
    for run in ["a", "b"] {
        let o = expflow(tmp.path(), &["verify", "--quiet", "--seed", "11", "--config", &cfg, "--out", run]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for f in ["trajectory.csv", "envelope.csv", "report.json"] {
        assert_eq!(fs::read(tmp.path().join("a").join(f)).unwrap(), fs::read(tmp.path().join("b").join(f)).unwrap(), "{f}");
    }
    let other = expflow(tmp.path(), &["verify", "--quiet", "--seed", "12", "--config", &cfg, "--out", "c"]);
    assert!(other.status.success());
    assert_ne!(fs::read(tmp.path().join("a/trajectory.csv")).unwrap(), fs::read(tmp.path().join("c/trajectory.csv")).unwrap());
}

#[test]
fn simulate_writes_the_trajectory_schema() {
    let tmp = TempDir::new().unwrap();
    let o = expflow(tmp.path(), &["simulate", "--config", &shipped("fb2-skew-rotation.json"), "--out", "run"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(tmp.path().join("run/trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "t,x_0,x_1,v_0,v_1,h,u,gap,gradnorm");
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first.len(), 9);
    assert_eq!(first[5].parse::<f64>().unwrap(), 4.5);
    assert!(csv.lines().count() > 1000);
}

#[test]
fn sweep_writes_a_feasibility_table() {
    let tmp = TempDir::new().unwrap();
    let o = expflow(tmp.path(), &["sweep", "--config", &shipped("sweep-fb1-lasso.json"), "--out", "run"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(tmp.path().join("run/sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "alpha,eta,status,decay_exponent,note");
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 144);
    assert!(rows.iter().any(|r| r[2] == "certified"));
    assert!(rows.iter().any(|r| r[2] == "rejected" && r[4].contains("α < 2ρβ²λ̲")));
}

#[test]
fn sweep_with_simulation_verifies_certified_cells() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "s.json",
        r#"{"problem": "skew-rotation", "system": "fb1", "params": {"eta": 1},
            "init": {"x0": [5, -3]}, "integrator": {"t_end": 15},
            "sweep": {"axes": {"alpha": [0.25, 0.5, 1.9, 2.0]}, "simulate": true}}"#,
    );
    let o = expflow(tmp.path(), &["sweep", "--config", &cfg, "--out", "run"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(tmp.path().join("run/sweep.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "alpha,status,decay_exponent,fitted_rate,verified,note");
    assert!(rows[1].starts_with("0.25,rejected,,,,1/β + λ̄/(2α) ≤ ρ + 1/η"));
    assert!(rows[2].starts_with("0.5,certified,5.0000000000000000e-1,") && rows[2].ends_with(",true,"));
    assert!(rows[3].starts_with("1.9,certified,") && rows[3].ends_with(",true,"));
    assert!(rows[4].starts_with("2,rejected,,,,α < 2ρβ²λ̲"));
}
