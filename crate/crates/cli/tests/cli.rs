// SPDX-License-Identifier: Apache-2.0

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn anosov(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_anosov"))
        .args(args)
        .env_remove("ANOSOV_CACHE_DIR")
        .output()
        .expect("binary runs")
}

fn summary(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("stdout is not JSON ({e}); stderr: {}", String::from_utf8_lossy(&out.stderr))
    })
}

fn corpus(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(name).display().to_string()
}

#[test]
fn verify_linear_cat() {
    let out = anosov(&["verify", "--spec", &corpus("cat.json")]);
    assert_eq!(out.status.code(), Some(0));
    let s = summary(&out);
    assert_eq!(s["passed"], true);
    assert_eq!(s["verdicts"]["cone_invariance"], true);
    let cone = &s["result"]["cone"];
    assert!((cone["lambda_u_min"].as_f64().unwrap() - 2.618033988749895).abs() < 1e-12);
    assert!(s["spec_hash"].as_str().unwrap().len() == 64);
    assert_eq!(s["seed"], 1);
    assert_eq!(s["tool"], "anosov");
}

#[test]
fn resonance_of_cat_is_inverse_golden_square() {
    let out = anosov(&["spectral", "resonances", "--spec", &corpus("cat.json"), "--N", "10"]);
    assert_eq!(out.status.code(), Some(0));
    let s = summary(&out);
    assert_eq!(s["result"]["verdict"], true);
    let zeros: Vec<&Value> = s["result"]["zeros"].as_array().unwrap().iter().filter(|z| z["counted"] == true).collect();
    assert_eq!(zeros.len(), 1);
    let oracle = (3.0 - 5f64.sqrt()) / 2.0;
    assert!((zeros[0]["re"].as_f64().unwrap() - oracle).abs() < 1e-7);
    assert!((zeros[0]["re"].as_f64().unwrap() - 0.3819660).abs() < 1e-7);
}

#[test]
fn diagnose_reports_plug_in_bounds() {
    let out = anosov(&["diagnose", "--spec", &corpus("cat.json"), "--r", "5"]);
    assert_eq!(out.status.code(), Some(0));
    let b = &summary(&out)["result"]["bounds"];
    assert!((b["rho_bound"].as_f64().unwrap() - 0.382).abs() < 1e-3);
    assert!((b["r1_bound"].as_f64().unwrap() - 3.01).abs() < 1e-9);
    assert_eq!(b["certified"], true);
}

#[test]
fn summaries_are_byte_identical_across_runs() {
    let args = ["bundles", "sample", "--spec", "builtin:cat_eps002", "--count", "10", "--seed", "7"];
    let a = anosov(&args);
    let b = anosov(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(summary(&a)["seed"], 7);
    let c = anosov(&["bundles", "sample", "--spec", "builtin:cat_eps002", "--count", "10", "--seed", "8"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn configuration_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"label":"bad","matrix":[[2,1],[1,2]],"terms":[]}"#).unwrap();
    let out = anosov(&["verify", "--spec", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("GL2(Z)"));

    assert_eq!(anosov(&["verify", "--spec", "builtin:nope"]).status.code(), Some(2));
    assert_eq!(anosov(&["verify", "--spec", "builtin:cat", "--halfwidth", "0"]).status.code(), Some(2));
    let exact = anosov(&["mme", "correlations", "--spec", "builtin:cat_eps005", "--exact", "--f1", "cos(1,0)"]);
    assert_eq!(exact.status.code(), Some(2));
    let f = anosov(&["horocycle", "integrate", "--spec", "builtin:cat", "--T", "1", "--f", "tan(1,0)"]);
    assert_eq!(f.status.code(), Some(2));
}

#[test]
fn cone_failure_is_a_verdict_in_verify_and_a_precondition_elsewhere() {
    let dir = tempfile::tempdir().unwrap();
    let big = dir.path().join("big.json");
    std::fs::write(
        &big,
        r#"{"label":"big","matrix":[[2,1],[1,1]],"terms":[{"coord":0,"mode":[1,0],"amp":0.5,"phase":0.0}]}"#,
    )
    .unwrap();
    let v = anosov(&["verify", "--spec", big.to_str().unwrap()]);
    assert_eq!(v.status.code(), Some(1));
    assert_eq!(summary(&v)["failing"][0], "cone_invariance");
    assert!(String::from_utf8_lossy(&v.stderr).contains("cone_invariance"));
    let d = anosov(&["diagnose", "--spec", big.to_str().unwrap()]);
    assert_eq!(d.status.code(), Some(2));
}

#[test]
fn database_round_trip_and_spec_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let db = dir.path().join("orbits.jsonl");
    let db = db.to_str().unwrap();
    let out = anosov(&["orbits", "enumerate", "--spec", "builtin:cat_eps005", "--n", "5", "--out", db]);
    assert_eq!(out.status.code(), Some(0));
    let counts: Vec<u64> =
        summary(&out)["result"]["counts"].as_array().unwrap().iter().map(|c| c[1].as_u64().unwrap()).collect();
    assert_eq!(counts, vec![1, 5, 16, 45, 121]);
    assert!(Path::new(&format!("{db}.manifest")).exists());

    let v = anosov(&["orbits", "validate", "--db", db]);
    assert_eq!(v.status.code(), Some(0));
    assert_eq!(summary(&v)["verdicts"]["level_5"], true);

    let wrong = anosov(&["orbits", "validate", "--db", db, "--spec", "builtin:cat"]);
    assert_eq!(wrong.status.code(), Some(2));

    let short = anosov(&["spectral", "resonances", "--db", db, "--N", "8"]);
    assert_eq!(short.status.code(), Some(2));

    let id = anosov(&["spectral", "check-identity", "extended", "--db", db, "--N", "5"]);
    assert_eq!(id.status.code(), Some(0));
    assert!(summary(&id)["result"]["max_residual"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn determinant_file_holds_full_precision_strings() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("det.json");
    let r = anosov(&[
        "spectral",
        "determinant",
        "--weight",
        "g-tilde",
        "--extended",
        "--N",
        "6",
        "--spec",
        "builtin:cat",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(r.status.code(), Some(0));
    let file: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let c1: f64 = file["coefficients"][1][0].as_str().unwrap().parse().unwrap();
    let lam = (3.0 + 5f64.sqrt()) / 2.0;
    assert!((c1 - -lam.powi(3) / (lam * lam - 1.0)).abs() < 1e-12);
}

#[test]
fn bundle_csv_columns() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("b.csv");
    let r = anosov(&["bundles", "sample", "--spec", "builtin:cat_eps005", "--count", "5", "--csv", csv.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(0));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "x1,x2,vs1,vs2,vu1,vu2,ms,mu,residual");
    assert_eq!(lines.count(), 5);
    let s = summary(&r);
    assert_eq!(s["verdicts"]["det_identity"], true);
}

#[test]
fn correlations_csv_and_fit() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("c.csv");
    let r = anosov(&[
        "mme",
        "correlations",
        "--spec",
        "builtin:cat_eps005",
        "--n",
        "10",
        "--f1",
        "cos(0,1)",
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(r.status.code(), Some(0));
    let s = summary(&r);
    assert_eq!(s["result"]["fit"]["verdict"], "consistent");
    assert_eq!(s["parameters"]["kmax"], 4);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("k,re,im,abs,noise_floor\n"));
    assert_eq!(text.lines().count(), 6);

    let over = anosov(&["mme", "correlations", "--spec", "builtin:cat", "--n", "10", "--kmax", "8", "--f1", "cos(1,0)"]);
    assert_eq!(over.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&over.stderr).contains("resolution"));

    let exact = anosov(&["mme", "correlations", "--spec", "builtin:cat", "--exact", "--f1", "e(1,0)", "--f2", "e(0,1)"]);
    assert_eq!(exact.status.code(), Some(0));
    let vals = summary(&exact)["result"]["correlations"]["values"].clone();
    assert!(vals.as_array().unwrap().iter().all(|c| c[0] == 0.0 && c[1] == 0.0));
}

#[test]
fn horocycle_subcommands() {
    let i = anosov(&["horocycle", "integrate", "--spec", "builtin:cat", "--x1", "0.1", "--x2", "0.2", "--T", "20", "--f", "cos(1,0)"]);
    assert_eq!(i.status.code(), Some(0));
    let s = summary(&i);
    assert_eq!(s["result"]["integral"]["unit_integral"].as_f64().unwrap(), 20.0);

    let r = anosov(&["horocycle", "rotation", "--spec", "builtin:cat", "--iterates", "500"]);
    assert_eq!(r.status.code(), Some(0));
    let omega = summary(&r)["result"]["omega"].as_f64().unwrap();
    assert!((omega - (5f64.sqrt() - 1.0) / 2.0).abs() < 1e-6);

    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("dev.csv");
    let d = anosov(&[
        "horocycle",
        "deviation",
        "--spec",
        "builtin:cat",
        "--f",
        "cos(1,0)",
        "--f",
        "sin(1,1)",
        "--samples",
        "3",
        "--mean-samples",
        "2",
        "--t-max",
        "1000",
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(d.status.code(), Some(0), "{}", String::from_utf8_lossy(&d.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("f,T,sup_dev,x0,x1,x2\n"));

    let c = anosov(&["horocycle", "coboundary", "--spec", "builtin:cat", "--f", "1+cos(1,0)", "--t-max", "100"]);
    assert_eq!(c.status.code(), Some(2));
}

#[test]
fn cache_directory_is_reused() {
    let dir = tempfile::tempdir().unwrap();
    let run = || {
        Command::new(env!("CARGO_BIN_EXE_anosov"))
            .args(["spectral", "resonances", "--spec", "builtin:cat", "--N", "8"])
            .env("ANOSOV_CACHE_DIR", dir.path())
            .output()
            .unwrap()
    };
    let a = run();
    assert_eq!(a.status.code(), Some(0));
    let files: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(files.len(), 2);
    let b = run();
    assert_eq!(a.stdout, b.stdout);
}
