use std::path::PathBuf;
use std::process::{Command, Output};

fn corpus(name: &str) -> String {
    format!("{}/../core/corpus/{name}.pi", env!("CARGO_MANIFEST_DIR"))
}

fn pithreads(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pithreads")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn scratch(name: &str, contents: &str) -> PathBuf {
    let p = std::env::temp_dir().join(format!("pithreads-cli-{}-{name}", std::process::id()));
    std::fs::write(&p, contents).unwrap();
    p
}

#[test]
fn proved_mutex_exits_zero() {
    let o = pithreads(&["analyze", &corpus("memory"), "--prove", "mutex unit cell over {2,6,10}"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("proved: mutex unit cell over {2,6,10}"));
}

#[test]
fn unknown_query_exits_one() {
    let o = pithreads(&["analyze", &corpus("memory"), "--prove", "unit cell: x5 <= 0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("unknown: unit cell: x5 <= 0"));
}

#[test]
fn empty_system_has_no_units() {
    let p = scratch("empty.pi", "0\n");
    let o = pithreads(&["analyze", p.to_str().unwrap(), "--report", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["contents"]["units"], serde_json::json!([]));
    assert_eq!(v["stabilized"], true);
}

#[test]
fn input_errors_exit_two() {
    let p = scratch("broken.pi", "new a in (a!1[] | a?1[])");
    let o = pithreads(&["analyze", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));

    let p = scratch("syntax.pi", "new a in (a!1[\n");
    let o = pithreads(&["analyze", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("2:"), "position expected");

    let o = pithreads(&["analyze", &corpus("memory"), "--prove", "unit cell: x@99 <= 1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = pithreads(&["analyze", &corpus("memory"), "--max-iter", "0"]);
    assert_eq!(o.status.code(), Some(2));
    let o = pithreads(&["analyze", "/nonexistent.pi"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn json_reports_are_deterministic() {
    let args = ["analyze", &corpus("synccomm"), "--report", "json", "--trace", "--prove", "unit a: x@2 <= 1"];
    let (a, b) = (pithreads(&args), pithreads(&args));
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert!(v["trace"].as_array().is_some_and(|t| !t.is_empty()));
    assert_eq!(v["queries"][0]["verdict"], "proved");
}

#[test]
fn partition_spec_files() {
    let spec = scratch("spec.json", r#"{"keys": ["b"], "mode": "marker-only"}"#);
    let o = pithreads(&["analyze", &corpus("semaphore2"), "--partition", spec.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("[*]"));
    let bad = scratch("bad.json", r#"{"keys": ["b"], "map": {"2": {"b": "zz"}}}"#);
    let o = pithreads(&["analyze", &corpus("semaphore2"), "--partition", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn oracle_check_reports_no_violations() {
    let o = pithreads(&["oracle-check", &corpus("semaphore2"), "--max-depth", "8"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("0 violations"));
    let o = pithreads(&["oracle-check", &corpus("memory"), "--max-configs", "300", "--report", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["configurations"], 300);
    assert_eq!(v["truncated"], true);
}
