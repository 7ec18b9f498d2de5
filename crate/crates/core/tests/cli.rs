mod common;

use common::fixture;
use serde_json::Value;
use std::process::{Command, Output};

fn lipmod(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lipmod")).args(args).output().unwrap()
}

fn fx(name: &str) -> String {
    fixture(name).to_str().unwrap().to_string()
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn without_inputs(mut v: Value) -> Value {
    v["manifest"]["inputs"] = Value::Null;
    v
}

#[test]
fn modulus_examples() {
    let out = lipmod(&["modulus", "--system", &fx("single.json"), "--x0", "[1]"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(report(&out)["modulus"], 2.0);

    let out = lipmod(&["modulus", "--system", &fx("point.json"), "--x0", "[0]"]);
    assert_eq!(out.status.code(), Some(0));
    let v = report(&out);
    assert_eq!(v["modulus"], "inf");
    assert_eq!(v["classification"], "infinite");
}

#[test]
fn hausdorff_example() {
    let out = lipmod(&["hausdorff", "--a", &fx("cloud_a.json"), "--b", &fx("cloud_b.json")]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(report(&out)["d_h"], 2.0);
}

#[test]
fn exit_codes() {
    assert_eq!(lipmod(&["ssc", "--system", &fx("interval.json")]).status.code(), Some(0));
    assert_eq!(lipmod(&["ssc", "--system", &fx("point.json")]).status.code(), Some(1));

    let out = lipmod(&["modulus", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(lipmod(&["modulus", "--system", &fx("single.json"), "--x0", "[5]"]).status.code(), Some(2));
    assert_eq!(lipmod(&["modulus", "--system", "/nonexistent.json", "--x0", "[0]"]).status.code(), Some(2));
    let out = lipmod(&[
        "convex-check", "--instance", &fx("abs.json"), "--a", &fx("abs_f.json"), "--b", &fx("abs_f.json"),
        "--x1", "[1]", "--delta", "0.01", "--kappa", "1.0",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(report(&out)["status"], "hypothesis_not_met");

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"tolerances": {"feas_tol": 1e-9, "active_tol": 1e-7, "solver_tol": 1.0, "max_iter": 100000}}"#,
    )
    .unwrap();
    let out = lipmod(&["--config", cfg.to_str().unwrap(), "safe-radius", "--instance", &fx("abs.json")]);
    assert_eq!(out.status.code(), Some(3));
}

fn round_trip(args: &[&str], file_flag: &str) {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first.json");
    let mut a: Vec<String> = vec!["--out".into(), first.to_str().unwrap().into()];
    a.extend(args.iter().map(|s| s.to_string()));
    let out = lipmod(&a.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r1: Value = serde_json::from_str(&std::fs::read_to_string(&first).unwrap()).unwrap();

    let p = first.to_str().unwrap();
    let mut b: Vec<&str> = vec!["--config", p, args[0], file_flag, p];
    for pair in args[1..].chunks(2) {
        if pair[0] != file_flag && pair[0] != "--x0" {
            b.extend(pair);
        }
    }
    let out = lipmod(&b);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r2 = report(&out);
    assert_eq!(without_inputs(r1), without_inputs(r2), "{args:?}");
}

#[test]
fn reports_round_trip() {
    round_trip(&["modulus", "--system", &fx("corner.json"), "--x0", "[1,1]"], "--system");
    round_trip(&["kappa0", "--instance", &fx("square.json")], "--instance");
    round_trip(&["safe-radius", "--instance", &fx("abs_wide.json")], "--instance");
    round_trip(
        &["estimate", "--system", &fx("interval.json"), "--x0", "[1]", "--samples", "50", "--seed", "3"],
        "--system",
    );
}

#[test]
fn estimate_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("s.csv");
    let out = lipmod(&[
        "estimate", "--system", &fx("single.json"), "--x0", "[1]", "--samples", "20", "--csv", csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(csv).unwrap();
    assert!(text.starts_with("delta,max_ratio,samples_used,discarded"));
    assert_eq!(text.lines().count(), 4);
}
