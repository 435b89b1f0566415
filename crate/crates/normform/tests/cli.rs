use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const SPHERE: &str = r#"{"N":1,"s":0,"k0":2,"P":[{"re":"1","im":"0","ez":[1],"ezb":[1],"ex":0}]}"#;
const CUBIC: &str = r#"{"N":1,"s":1,"k0":3,"P":[{"re":"1","im":"0","ez":[1],"ezb":[1],"ex":0}]}"#;

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str], input: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_normform")).args(args).arg("--input").arg(input).output().unwrap()
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn normalize_writes_result_and_diagnostics() {
    let dir = TempDir::new().unwrap();
    let tail = r#"{"4":[{"re":"1","im":"0","ez":[2],"ezb":[2],"ex":0}]}"#;
    let input = write(&dir, "in.json", &format!(r#"{{"model":{SPHERE},"tail":{tail},"order":6}}"#));
    let output = dir.path().join("out.json");
    let diag = dir.path().join("diag.json");
    let out = Command::new(env!("CARGO_BIN_EXE_normform"))
        .args(["normalize", "--input"])
        .arg(&input)
        .arg("--output")
        .arg(&output)
        .arg("--diagnostics")
        .arg(&diag)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let res: Value = serde_json::from_str(&std::fs::read_to_string(&output).unwrap()).unwrap();
    assert_eq!(res["normal_form"]["tail"], serde_json::json!({}));
    assert_eq!(res["diagnostics"].as_array().unwrap().len(), 4);
    let d: Value = serde_json::from_str(&std::fs::read_to_string(&diag).unwrap()).unwrap();
    assert!(d[0]["seconds"].is_number());
    assert!(String::from_utf8_lossy(&out.stdout).contains("class 6: 14 unknowns"));
}

#[test]
fn verify_passes_on_a_fresh_result() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "in.json", &format!(r#"{{"model":{CUBIC}}}"#));
    let out = run(&["verify"], &input);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_json(&out)["all_passed"], Value::Bool(true));
}

#[test]
fn verify_flags_a_tampered_result() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "in.json", &format!(r#"{{"model":{SPHERE}}}"#));
    let out = run(&["normalize"], &input);
    let mut result = stdout_json(&out);
    result["normal_form"]["tail"]["6"] = serde_json::json!([{"re":"1","im":"0","ez":[1],"ezb":[1],"ex":2}]);
    let doc = format!(r#"{{"model":{SPHERE},"result":{result}}}"#);
    let input = write(&dir, "tampered.json", &doc);
    let out = run(&["verify"], &input);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("FAIL"));
}

#[test]
fn weights_report_homogeneity() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "in.json", &format!(r#"{{"model":{CUBIC}}}"#));
    let out = run(&["weights"], &input);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["homogeneity"]["ok"], 3);
    assert!(v["monomials"].as_array().unwrap().iter().all(|m| m["weight"] == 3));

    let out = run(&["weights", "--weights", "literal"], &input);
    assert_eq!(out.status.code(), Some(1));
    let v = stdout_json(&out);
    assert_eq!(v["homogeneity"]["error"], "z*zb*x has weight 2, expected 3");
    assert!(v["monomials"][1]["audit"]["literal_evaluations"].is_array());
}

#[test]
fn fischer_decomposes_and_builds_families() {
    let dir = TempDir::new().unwrap();
    let f = r#"[{"re":"1","im":"0","ez":[1],"ezb":[1],"ex":1}]"#;
    let input = write(&dir, "f.json", &format!(r#"{{"model":{SPHERE},"f":{f}}}"#));
    let out = run(&["fischer"], &input);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout_json(&out)["A"].is_array());

    let input = write(&dir, "fam.json", &format!(r#"{{"model":{SPHERE},"kmax":3}}"#));
    let out = run(&["fischer"], &input);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_json(&out)["independent"], Value::Bool(true));
}

#[test]
fn degenerate_decomposition_exits_two() {
    let dir = TempDir::new().unwrap();
    let f = r#"[{"re":"1","im":"0","ez":[0],"ezb":[0],"ex":1}]"#;
    let input = write(&dir, "f.json", &format!(r#"{{"model":{CUBIC},"f":{f}}}"#));
    assert_eq!(run(&["fischer"], &input).status.code(), Some(2));
}

#[test]
fn validation_failures_exit_one() {
    let dir = TempDir::new().unwrap();
    let pure = r#"{"model":{"N":1,"s":0,"k0":2,"P":[{"re":"1","im":"0","ez":[2],"ezb":[0],"ex":0}]}}"#;
    let input = write(&dir, "pure.json", pure);
    let out = run(&["normalize"], &input);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("validation"));

    let input = write(&dir, "low.json", &format!(r#"{{"model":{SPHERE}}}"#));
    assert_eq!(run(&["normalize", "--order", "2"], &input).status.code(), Some(1));
    assert_eq!(run(&["normalize", "--weights", "literal"], &input).status.code(), Some(1));
}

#[test]
fn parse_and_io_failures_exit_three() {
    let dir = TempDir::new().unwrap();
    let bad = r#"{"model":{"N":1,"s":0,"k0":2,"P":[{"re":"1/0","im":"0","ez":[1],"ezb":[1],"ex":0}]}}"#;
    let input = write(&dir, "bad.json", bad);
    assert_eq!(run(&["normalize"], &input).status.code(), Some(3));
    let input = write(&dir, "broken.json", "{ not json");
    assert_eq!(run(&["normalize"], &input).status.code(), Some(3));
    assert_eq!(run(&["normalize"], &dir.path().join("missing.json")).status.code(), Some(3));
}
