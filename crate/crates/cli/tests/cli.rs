use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn data(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "tests", "data", name].iter().collect();
    p.to_string_lossy().into_owned()
}

fn fvdi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fvdi")).args(args).output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn check_atomic(extra: &[&str]) -> Output {
    let (sig, field) = (data("sig.json"), data("atomic_field.json"));
    let mut args = vec![
        "check", "--formula", "P(x)", "--sig", &sig, "--field", &field, "--assign", r#"{"x":["a","b"]}"#, "--k", "2",
    ];
    args.extend_from_slice(extra);
    fvdi(&args)
}

#[test]
fn check_atomic_example() {
    let out = check_atomic(&[]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["v"], "1/2");
    assert_eq!(v["g"], "1/4");
    assert_eq!(v["passed"], true);
    assert_eq!(check_atomic(&["--mode", "maximal"]).status.code(), Some(0));
}

#[test]
fn typei_rho_point_mass() {
    let out = fvdi(&["typei", "rho", "--desc", &data("m2.json")]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), r#"{"(2,1)":"1"}"#);
}

#[test]
fn typei_tensor_and_equiv() {
    let m2 = data("m2.json");
    let out = fvdi(&["typei", "tensor", "--a", &m2, "--b", &m2]);
    assert_eq!(out.status.code(), Some(0));
    let t = out.stdout;
    let out = fvdi(&["typei", "rho", "--desc", std::str::from_utf8(&t).unwrap().trim()]);
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), r#"{"(4,1)":"1"}"#);
    let out = fvdi(&["typei", "equiv", "--a", &m2, "--b", &m2]);
    assert_eq!(json(&out)["equiv"], true);
}

#[test]
fn budget_exceeded_exits_two() {
    let out = fvdi(&["transform", "--formula", "sup y . P(y)", "--sig", &data("sig.json"), "--budget-c", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["error"]["kind"], "budget");
}

#[test]
fn input_errors_exit_two() {
    let sig = data("sig.json");
    for args in [
        vec!["transform", "--formula", "P(x", "--sig", &sig],
        vec!["transform", "--formula", "P(x)", "--sig", &sig, "--k", "1"],
        vec!["transform", "--formula", "P(x)", "--sig", "/nonexistent.json"],
        vec!["eval", "--formula", "P(x)", "--sig", &sig, "--field", "{}"],
    ] {
        let out = fvdi(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert_eq!(json(&out)["error"]["kind"], "input");
    }
}

#[test]
fn transform_document_is_deterministic() {
    let sig = data("sig.json");
    let args = ["transform", "--formula", "sub(P(x), Q(x))", "--sig", &sig, "--k", "3"];
    let a = fvdi(&args);
    let b = fvdi(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let v = json(&a);
    assert_eq!(v["k"], 3);
    assert_eq!(v["formulas"].as_array().unwrap().len(), 2);
}

#[test]
fn eval_sup_formula() {
    let out = fvdi(&["eval", "--formula", "sup y . P(y)", "--sig", &data("sig.json"), "--field", &data("atomic_field.json")]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["value"], "1/2");
}

#[test]
fn mba_monotone_finds_violation() {
    let alg = r#"{"atoms":["a","b"],"weights":["1/2","1/2"]}"#;
    let anti = r#"{"measure":{"compl":{"var":"Z[0][1/2]"}}}"#;
    let out = fvdi(&["mba", "monotone", "--algebra", alg, "--g", anti]);
    assert_eq!(out.status.code(), Some(1));
    assert!(json(&out)["counterexample"].is_object());
    let mono = r#"{"measure":{"var":"Z[0][1/2]"}}"#;
    assert_eq!(fvdi(&["mba", "monotone", "--algebra", alg, "--g", mono]).status.code(), Some(0));
}

#[test]
fn mba_defin_and_dist() {
    let alg = r#"{"atoms":["a","b","c"],"weights":["1/4","1/4","1/2"]}"#;
    let chain = r#"[["a","b"],["a"]]"#;
    let out = fvdi(&["mba", "defin", "--algebra", alg, "--chain", chain, "--x", chain]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!((v["phi"].as_str(), v["member"].as_bool()), (Some("0"), Some(true)));
    let out = fvdi(&["mba", "dist", "--algebra", alg, "--chain", chain, "--x", r#"[["c"],["a","b"]]"#]);
    assert_eq!(json(&out)["dist"], "1/2");
}

#[test]
fn selftest_small_run_is_reproducible() {
    let args = [
        "selftest", "--instances", "12", "--equivalence-pairs", "3", "--typei-quadruples", "5", "--only", "1,2,6,8",
    ];
    let a = fvdi(&args);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stdout));
    assert_eq!(a.stdout, fvdi(&args).stdout);
    assert_eq!(json(&a)["criteria"].as_array().unwrap().len(), 4);
}
