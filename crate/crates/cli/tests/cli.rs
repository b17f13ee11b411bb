use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gauss-renyi"))
        .current_dir(dir)
        .arg("--out")
        .arg(dir.join("out"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

#[test]
fn density_at_one_recovers_gauss() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(tmp.path(), &["density", "--p", "1.0"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("max deviation from 1/((1+x) log 2)"));
    let meta = json(&tmp.path().join("out/density.json"));
    assert!(meta["gauss_max_deviation"].as_f64().unwrap() <= 1e-8);
    let csv = fs::read_to_string(tmp.path().join("out/density.csv")).unwrap();
    assert!(csv.starts_with("x,h\n"));
    assert_eq!(csv.lines().count(), 1002);
}

#[test]
fn density_refusals() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(tmp.path(), &["density", "--p", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sigma-finite"));
    assert!(!tmp.path().join("out").exists());
    assert_eq!(run(tmp.path(), &["density", "--p", "1.5"]).status.code(), Some(1));
    assert_eq!(run(tmp.path(), &["density", "--p", "abc"]).status.code(), Some(1));
    assert_eq!(run(tmp.path(), &["density"]).status.code(), Some(1));
    assert_eq!(run(tmp.path(), &["frobnicate"]).status.code(), Some(1));
}

#[test]
fn density_is_deterministic_and_manifest_matches() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(run(a.path(), &["density", "--p", "0.5"]).status.code(), Some(0));
    assert_eq!(run(b.path(), &["density", "--p", "0.5", "--threads", "3"]).status.code(), Some(0));
    let ca = fs::read(a.path().join("out/density.csv")).unwrap();
    let cb = fs::read(b.path().join("out/density.csv")).unwrap();
    assert_eq!(ca, cb);
    let manifest = json(&a.path().join("out/manifest.json"));
    assert_eq!(manifest["command"], "density");
    assert_eq!(manifest["parameters"]["p"], 0.5);
    let outputs = manifest["outputs"].as_array().unwrap();
    assert_eq!(outputs.len(), 2);
    for entry in outputs {
        let bytes = fs::read(a.path().join("out").join(entry["file"].as_str().unwrap())).unwrap();
        assert_eq!(entry["sha256"].as_str().unwrap(), hex::encode(Sha256::digest(&bytes)));
    }
}

#[test]
fn bounds_table() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(tmp.path(), &["bounds", "--p", "0.5", "--k-max", "4"]);
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(tmp.path().join("out/bounds.csv")).unwrap();
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0], "1");
    assert!((row[2].parse::<f64>().unwrap() - 0.582323).abs() < 1e-6);
    assert_eq!(row[3], "true");
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn verify_closed_forms_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(tmp.path(), &["verify", "--suite", "closed-forms"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert_eq!(stdout(&o).matches(" PASS ").count(), 4);
    assert_eq!(run(tmp.path(), &["verify", "--suite", "nonsense"]).status.code(), Some(1));
}

#[test]
fn verify_bounds_reports_failure_code() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(tmp.path(), &["verify", "--suite", "bounds"]);
    let report = json(&tmp.path().join("out/verify.json"));
    let all_pass = report["results"]
        .as_array()
        .unwrap()
        .iter()
        .all(|r| r["error"].is_null() && r["checks"].as_array().unwrap().iter().all(|c| c["passed"] == true));
    assert_eq!(o.status.code(), Some(if all_pass { 0 } else { 3 }));
}

#[test]
fn simulate_reproducible_across_threads() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["simulate", "--p", "0.5", "--samples", "1000000", "--seed", "7"];
    assert_eq!(run(a.path(), &args).status.code(), Some(0));
    let mut threaded = args.to_vec();
    threaded.extend(["--threads", "2"]);
    assert_eq!(run(b.path(), &threaded).status.code(), Some(0));
    let ma = json(&a.path().join("out/manifest.json"));
    let mb = json(&b.path().join("out/manifest.json"));
    assert_eq!(ma["outputs"], mb["outputs"]);
    assert_eq!(ma["seed"], 7);
    let meta = json(&a.path().join("out/simulate.json"));
    assert!(meta["l1_to_density"].as_f64().unwrap() <= 0.02);
}

#[test]
fn simulate_at_zero_has_no_reference() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(tmp.path(), &["simulate", "--p", "0", "--samples", "1000", "--bins", "10"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(json(&tmp.path().join("out/simulate.json"))["l1_to_density"].is_null());
}

#[test]
fn hardy_table() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run(tmp.path(), &["hardy", "--n-max", "10"]).status.code(), Some(0));
    let csv = fs::read_to_string(tmp.path().join("out/hardy.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("n,hs,trace_bound,op_bound,eta_sq,xi_sq"));
    for (i, line) in lines.enumerate() {
        let cols: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        let n = (i + 1) as f64;
        assert_eq!(cols[0], n);
        assert!((cols[1] * 2.0 * n - 1.0).abs() < 1e-8);
    }
    assert_eq!(run(tmp.path(), &["hardy", "--n-max", "151"]).status.code(), Some(1));
}

#[test]
fn modify_reports_both_splits() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run(tmp.path(), &["modify", "--p", "0.5"]).status.code(), Some(0));
    let reports = json(&tmp.path().join("out/modification.json"));
    let reports = reports.as_array().unwrap();
    assert_eq!(reports.len(), 2);
    for r in reports {
        assert!(r["resolvent_residual"].as_f64().unwrap() <= 1e-10);
        assert!(r["lift_discrepancy"].as_f64().unwrap() <= 1e-7);
    }
    assert_eq!(run(tmp.path(), &["modify", "--p", "0.001", "--split", "hardy"]).status.code(), Some(2));
}

#[test]
fn writes_only_inside_out() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run(tmp.path(), &["bounds", "--p", "0.3"]).status.code(), Some(0));
    let entries: Vec<_> = fs::read_dir(tmp.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(entries, vec![std::ffi::OsString::from("out")]);
}
