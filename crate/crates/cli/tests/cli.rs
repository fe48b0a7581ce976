use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_curvemeas"));
    c.env_remove("CURVEMEAS_THREADS");
    c
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn solve_dirac_regime() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let input = data("two_dirac.json");
    let o = run(&["solve", "--input", s(&input), "--lambda", "0.6", "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&out.join("result.json"));
    assert_eq!(r["collapsed"], true);
    assert!((r["energy"].as_f64().unwrap() - 1.0).abs() < 1e-6);

    let m = json(&out.join("manifest.json"));
    assert_eq!(m["command"], "solve");
    let digest = m["inputs"][0]["sha256"].as_str().unwrap();
    assert_eq!(digest, hex::encode(Sha256::digest(std::fs::read(&input).unwrap())));
    assert_eq!(m["config"]["lambda"], 0.6);

    // the result file parses back into the library type
    let text = std::fs::read_to_string(out.join("result.json")).unwrap();
    let back: curvemeas::SolveResult = serde_json::from_str(&text).unwrap();
    assert!(back.collapsed);
    assert_eq!(back.nu.graph().vertices().len(), 1);
}

#[test]
fn bad_flags_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    let input = data("two_dirac.json");
    let o = run(&["solve", "--input", s(&input), "--lambda", "0", "--out", s(&out)]);
    assert_eq!(code(&o), 2);
    let o = run(&["solve", "--lambda", "0.3", "--out", s(&out)]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    let o = run(&["solve", "--input", s(&input), "--lambda", "0.3", "--out", s(&out), "--tol", "2"]);
    assert_eq!(code(&o), 2);
    let o = bin()
        .env("CURVEMEAS_THREADS", "zero")
        .args(["length", "--input", s(&data("unit_segment_curve.json"))])
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn unreadable_input_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"dimension\": 1, \"points\": [[1").unwrap();
    let out = dir.path().join("x");
    let o = run(&["solve", "--input", s(&bad), "--lambda", "0.3", "--out", s(&out)]);
    assert_eq!(code(&o), 3);
    let missing = dir.path().join("nope.json");
    let o = run(&["solve", "--input", s(&missing), "--lambda", "0.3", "--out", s(&out)]);
    assert_eq!(code(&o), 3);
    let csv = dir.path().join("bad.csv");
    std::fs::write(&csv, "x,y\n1,2\n3,oops\n").unwrap();
    let o = run(&["transport", "--source", s(&csv), "--target", s(&csv)]);
    assert_eq!(code(&o), 3);
}

#[test]
fn same_seed_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let spec = data("two_blobs_spec.json");
    let rho = dir.path().join("rho.json");
    assert_eq!(code(&run(&["sample", "--spec", s(&spec), "--n", "60", "--seed", "4", "--output", s(&rho)])), 0);
    let mut texts = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("r{k}"));
        let o = run(&[
            "solve", "--input", s(&rho), "--lambda", "0.3", "--quadrature", "30", "--vertices", "4", "--seed", "9", "--out", s(&out), "--svg",
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        assert!(out.join("result.svg").exists());
        texts.push((std::fs::read(out.join("result.json")).unwrap(), std::fs::read(out.join("plan.csv")).unwrap()));
    }
    assert!(texts[0] == texts[1]);
}

#[test]
fn sweep_brackets_critical_lambda() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep");
    let input = data("two_dirac.json");
    let o = run(&["sweep", "--input", s(&input), "--lambda-range", "0.05:0.8:8", "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let sum = json(&out.join("summary.json"));
    let b = &sum["flip_bracket"];
    assert!(b[0].as_f64().unwrap() < 0.5 && b[1].as_f64().unwrap() > 0.5);
    let star = sum["lambda_star_empirical"].as_f64().unwrap();
    assert!(star <= 2.0);
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 9);
    assert!(csv.starts_with("lambda,w_term,l_term,energy,collapsed,support_length"));

    let one = dir.path().join("one");
    let o = run(&["sweep", "--input", s(&input), "--lambdas", "0.3", "--out", s(&one)]);
    assert_eq!(code(&o), 0);
    let sum = json(&one.join("summary.json"));
    assert!(sum["lambda_star_empirical"].is_null());
    assert_eq!(std::fs::read_to_string(one.join("sweep.csv")).unwrap().lines().count(), 2);

    let o = run(&["sweep", "--input", s(&input), "--lambdas", "0.3,-0.1", "--out", s(&one)]);
    assert_eq!(code(&o), 2);
    let o = run(&["sweep", "--input", s(&input), "--lambda-range", "0.8:0.05:8", "--out", s(&one)]);
    assert_eq!(code(&o), 2);
}

#[test]
fn length_and_approx() {
    let o = run(&["length", "--input", s(&data("unit_segment_curve.json"))]);
    assert_eq!(code(&o), 0);
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), "1.0");

    let o = run(&["approx", "--input", s(&data("piecewise_curve.json")), "--n", "8"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let added = v["report"]["added_length"].as_f64().unwrap();
    assert!((added - 0.5).abs() < 1e-9, "{added}");
}

#[test]
fn transport_writes_plan() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.json");
    std::fs::write(&a, "x,y\n0,0\n1,0\n").unwrap();
    std::fs::write(&b, r#"{"dimension": 2, "points": [[0, 1], [1, 1]]}"#).unwrap();
    let out = dir.path().join("t");
    let o = run(&["transport", "--source", s(&a), "--target", s(&b), "--p", "2", "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let t = json(&out.join("transport.json"));
    assert!((t["cost"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    let plan = std::fs::read_to_string(out.join("plan.csv")).unwrap();
    assert!(plan.starts_with("source_index,target_index,mass,cost_contribution"));
    assert_eq!(plan.lines().count(), 3);
}

#[test]
fn validate_two_dirac_passes() {
    let o = run(&["validate", "--suite", "two-dirac"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["pass"], true);
}
