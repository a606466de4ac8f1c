use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use num_complex::Complex64;
use pmc_core::io::save_qdiff;
use pmc_core::{Chart, Grid, QDiffField};
use serde_json::Value;

fn pmc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pmc")).args(args).output().expect("binary runs")
}

fn run_ok(args: &[&str]) -> Value {
    let out = pmc(args);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("summary JSON on stdout")
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn classify_su2() {
    let dir = tempfile::tempdir().unwrap();
    let s = run_ok(&["classify", "--unimodular", "2,2,2", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(s["family"], "SU(2)");
    assert_eq!(s["h0"], "compact");
    let mu: Vec<f64> = serde_json::from_value(s["mu"].clone()).unwrap();
    assert_eq!(mu, vec![1.0, 1.0, 1.0]);
    assert_eq!(summary(dir.path()), s);
}

#[test]
fn classify_semidirect_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let s = run_ok(&["classify", "--nonunimodular", "1,0", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(s["family"], "H2 x R");
    assert_eq!(s["h0"].as_f64(), Some(1.0));
}

#[test]
fn sphere_closes_and_writes_profile() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let s = run_ok(&["sphere", "--h", "1+0.3*t^2", "--steps", "10000", "--out", out]);
    assert!(s["closure_defect"].as_f64().unwrap() < 1e-6);
    assert_eq!(s["closed"], true);
    assert_eq!(s["strictly_convex"], true);
    let csv = fs::read_to_string(dir.path().join("profile.csv")).unwrap();
    assert!(csv.starts_with("theta,x,z,kappa1,kappa2\n"));
    assert_eq!(csv.lines().count(), 1 + 10_003);
}

#[test]
fn residual_of_round_sphere_field() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    run_ok(&["residual", "--fixture", "round-sphere", "--n", "32", "--out", out]);
    let field = dir.path().join("round_sphere.csv");
    let s = run_ok(&["residual", "--group", "r3", "--field", field.to_str().unwrap(), "--out", out]);
    assert!(s["max_residual"].as_f64().unwrap() < 1e-12, "{s}");
    let rows = fs::read_to_string(dir.path().join("residual.csv")).unwrap();
    assert_eq!(rows.lines().count(), 1 + 33 * 33);
}

#[test]
fn reconstruct_round_sphere() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    run_ok(&["residual", "--fixture", "round-sphere", "--n", "32", "--out", out]);
    let field = dir.path().join("round_sphere.csv");
    let s = run_ok(&["reconstruct", "--field", field.to_str().unwrap(), "--base", "0,0,-1", "--out", out]);
    assert_eq!(s["backend"], "euclidean");
    let obj = fs::read_to_string(dir.path().join("mesh.obj")).unwrap();
    assert_eq!(obj.lines().filter(|l| l.starts_with("v ")).count(), 33 * 33);
    // Every vertex lies near the unit sphere.
    for l in obj.lines().filter(|l| l.starts_with("v ")) {
        let v: Vec<f64> = l[2..].split_whitespace().map(|x| x.parse().unwrap()).collect();
        let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        assert!((r - 1.0).abs() < 1e-2, "{r}");
    }
    assert!(dir.path().join("mesh.json").exists());
}

#[test]
fn qdiff_on_model_patch_is_small() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    run_ok(&["sphere", "--h", "1+0.3*t^2", "--patch-n", "65", "--out", out]);
    let field = dir.path().join("model_q.csv");
    let s = run_ok(&["qdiff", "--field", field.to_str().unwrap(), "--out", out]);
    assert!(s["max_abs_q"].as_f64().unwrap() < 1e-3, "{s}");
    assert!(dir.path().join("q.csv").exists());
}

#[test]
fn qdiff_against_round_model_matches_half_hopf() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    run_ok(&["residual", "--fixture", "round-sphere", "--n", "16", "--h0", "2", "--out", out]);
    let field = dir.path().join("round_sphere.csv");
    let s = run_ok(&["qdiff", "--field", field.to_str().unwrap(), "--hopf", "--out", out]);
    assert!(s["hopf"]["max_abs_q_minus_half_p"].as_f64().unwrap() < 1e-12, "{s}");
}

#[test]
fn index_of_synthetic_square() {
    let dir = tempfile::tempdir().unwrap();
    let q = QDiffField::from_fn(Grid::square(40, 1.0), Chart::Q, |z| (z - Complex64::new(0.1, 0.05)).powi(2));
    let path = dir.path().join("q.csv");
    save_qdiff(&q, &path).unwrap();
    let s = run_ok(&["index", "--q", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(s["zero_count"], 1);
    assert_eq!(s["winding_sum"], 2);
    let zeros: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("zeros.json")).unwrap()).unwrap();
    assert_eq!(zeros["zeros"][0]["winding"], 2);
}

#[test]
fn roundtrip_converges() {
    let dir = tempfile::tempdir().unwrap();
    let s = run_ok(&["roundtrip", "--fixture", "euclidean-sphere", "--resolutions", "32,64", "--out", dir.path().to_str().unwrap()]);
    let ratio = s["error_ratios"][0].as_f64().unwrap();
    assert!((3.0..5.0).contains(&ratio), "{ratio}");
    assert!(s["translation_defect"].as_f64().unwrap() < 1e-8);
    assert!(dir.path().join("roundtrip.obj").exists());
}

#[test]
fn potential_leaf_zero() {
    let dir = tempfile::tempdir().unwrap();
    let s = run_ok(&["potential", "--group", "h3", "--h", "1", "--q", "0,0", "--out", dir.path().to_str().unwrap()]);
    assert!(s["eval"]["abs_r"].as_f64().unwrap() < 1e-15);
}

#[test]
fn config_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    let out = dir.path().join("o");
    fs::write(
        &cfg,
        format!(r#"{{"h":"1+0.3*t^2","steps":2000,"output_dir":{:?},"tolerances":{{"closure":1e-6}}}}"#, out.to_str().unwrap()),
    )
    .unwrap();
    let s = run_ok(&["sphere", "--config", cfg.to_str().unwrap()]);
    assert_eq!(s["steps"], 2000);
    assert!(out.join("profile.csv").exists());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(pmc(&["--help"]).status.code(), Some(0));
    assert_eq!(pmc(&["frobnicate"]).status.code(), Some(64));
    assert_eq!(pmc(&["classify", "--colour", "red"]).status.code(), Some(64));
    // Two negative constants are not a valid unimodular group.
    assert_eq!(pmc(&["classify", "--unimodular", "-1,-1,2", "--out", out]).status.code(), Some(2));
    assert_eq!(pmc(&["sphere", "--h", "1+", "--out", out]).status.code(), Some(2));
    // Asymmetric data pinch off.
    assert_eq!(pmc(&["sphere", "--h", "1+0.3*t", "--out", out]).status.code(), Some(3));
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"resolutions":[128,64]}"#).unwrap();
    assert_eq!(pmc(&["roundtrip", "--config", cfg.to_str().unwrap()]).status.code(), Some(65));
    fs::write(&cfg, "{not json").unwrap();
    assert_eq!(pmc(&["classify", "--config", cfg.to_str().unwrap()]).status.code(), Some(65));
    assert_eq!(pmc(&["residual", "--field", "/nonexistent.csv", "--out", out]).status.code(), Some(65));
}

#[test]
fn outputs_are_reproducible_across_thread_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for (dir, threads) in [(&a, "1"), (&b, "4")] {
        let out = dir.path().to_str().unwrap();
        run_ok(&["sphere", "--h", "1+0.3*t^2", "--steps", "2000", "--patch-n", "33", "--threads", threads, "--out", out]);
        let field = dir.path().join("model_q.csv");
        run_ok(&["qdiff", "--field", field.to_str().unwrap(), "--threads", threads, "--out", out]);
    }
    for name in ["profile.csv", "model_q.csv", "model_w.csv", "q.csv", "summary.json"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
}
