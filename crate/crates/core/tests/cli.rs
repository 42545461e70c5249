use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const SMALL: &str = r#"{
  "dimension": 2,
  "target": "linf",
  "epsilon": 0.1,
  "lambda1": 0.9,
  "seed": 17,
  "samples": {"convexity": 200, "sphere": 300, "fd": 20, "inclusions": 100, "paths": 2, "path_points": 32}
}"#;

fn renorm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_renorm"))
        .args(args)
        .env("RENORM_THREADS", "2")
        .output()
        .expect("spawn renorm")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn run_writes_reports_and_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.json", SMALL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = renorm(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
        assert!(String::from_utf8_lossy(&o.stdout).contains("PASS"));
    }
    assert_eq!(a.join("slabs.json").exists(), b.join("slabs.json").exists());
    for file in ["report.json", "manifest.json"] {
        let (x, y) = (fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap());
        assert_eq!(x, y, "{file} differs between runs");
    }
    let report: serde_json::Value = serde_json::from_slice(&fs::read(a.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["certificates"]["passed"], true);
    assert!(report["sup_rel_error"].as_f64().unwrap() < 0.4 + 0.1 + 0.02);
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 17);
}

#[test]
fn small_nets_write_slabs() {
    let dir = TempDir::new().unwrap();
    let text = SMALL.replace("\"epsilon\": 0.1", "\"epsilon\": 0.12").replace("\"lambda1\": 0.9", "\"lambda1\": 0.85");
    let text = text.replace("\"seed\": 17,", "\"seed\": 17, \"size_caps\": {\"slab_json\": 1000000},");
    let cfg = write_config(dir.path(), "c.json", &text);
    let out = dir.path().join("o");
    let o = renorm(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let slabs: Vec<serde_json::Value> = serde_json::from_slice(&fs::read(out.join("slabs.json")).unwrap()).unwrap();
    assert!(!slabs.is_empty());
    for s in &slabs {
        assert_eq!(s["g"].as_array().unwrap().len(), 2);
        assert!(!s["members"].as_array().unwrap().is_empty());
    }
}

#[test]
fn thread_count_does_not_change_the_report() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.json", SMALL);
    let mut reports = Vec::new();
    for threads in ["1", "3"] {
        let out = dir.path().join(threads);
        let o = Command::new(env!("CARGO_BIN_EXE_renorm"))
            .args(["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
            .env("RENORM_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(code(&o), 0);
        reports.push(fs::read(out.join("report.json")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn section_csv_is_deterministic_and_sandwiched() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.json", SMALL);
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    for out in [&a, &b] {
        let o = renorm(&[
            "section", "--config", cfg.to_str().unwrap(), "--axes", "0,1", "--samples", "64", "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("theta,target_gauge,smooth_gauge,ratio"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 64);
    for r in &rows {
        let expected = r[0].cos().abs().max(r[0].sin().abs());
        assert!((r[1] - expected).abs() < 1e-12, "{r:?}");
        assert!((r[3] - r[2] / r[1]).abs() < 1e-12);
        assert!((r[3] - 1.0).abs() <= 4.0 * 0.1 + 0.1 + 0.02, "{r:?}");
    }
}

#[test]
fn invalid_parameters_exit_2() {
    let dir = TempDir::new().unwrap();
    let bad_eps = write_config(dir.path(), "e.json", &SMALL.replace("\"epsilon\": 0.1", "\"epsilon\": 0.2"));
    let malformed = write_config(dir.path(), "m.json", "{\"dimension\": 2,");
    let unknown = write_config(dir.path(), "u.json", &SMALL.replace("\"seed\"", "\"sed\""));
    for cfg in [&bad_eps, &malformed, &unknown] {
        let o = renorm(&["run", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
        assert_eq!(code(&o), 2, "{}", cfg.display());
    }
    let missing = dir.path().join("absent.json");
    assert_eq!(code(&renorm(&["verify", "--config", missing.to_str().unwrap(), "--suite", "nets"])), 2);
    assert_eq!(code(&renorm(&["frobnicate"])), 2);
}

#[test]
fn unknown_suite_exits_2() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.json", SMALL);
    let o = renorm(&["verify", "--config", cfg.to_str().unwrap(), "--suite", "everything"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn size_cap_exits_3() {
    let dir = TempDir::new().unwrap();
    let text = SMALL.replace("\"seed\": 17,", "\"seed\": 17, \"size_caps\": {\"net_points\": 100},");
    let cfg = write_config(dir.path(), "c.json", &text);
    let o = renorm(&["run", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(code(&o), 3);
}

#[test]
fn sabotaged_net_fails_inclusions() {
    let dir = TempDir::new().unwrap();
    let text = SMALL.replace("\"seed\": 17,", "\"seed\": 17, \"sabotage\": \"zero-net\",");
    let cfg = write_config(dir.path(), "c.json", &text);
    let o = renorm(&["verify", "--config", cfg.to_str().unwrap(), "--suite", "inclusions"]);
    assert_eq!(code(&o), 1, "{}", String::from_utf8_lossy(&o.stdout));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL inclusions.net.lower"));
}

#[test]
fn verify_suites_pass_on_a_valid_config() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.json", SMALL);
    for suite in ["projection", "nets", "inclusions", "convexity", "smoothness"] {
        let o = renorm(&["verify", "--config", cfg.to_str().unwrap(), "--suite", suite]);
        let stdout = String::from_utf8_lossy(&o.stdout).into_owned();
        assert_eq!(code(&o), 0, "{suite}: {stdout}");
        assert!(stdout.lines().all(|l| l.starts_with("PASS")), "{stdout}");
    }
}
