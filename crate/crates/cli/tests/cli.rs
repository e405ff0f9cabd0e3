use std::path::Path;
use std::process::{Command, Output};

fn sparselab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sparselab")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn empty_suite_list_succeeds_and_writes_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "empty.json", r#"{"name": "empty", "suites": []}"#);
    let out = dir.path().join("out");
    let o = sparselab(&["run", &cfg, "--out", out.to_str().unwrap(), "--jobs", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("manifest.json").is_file());
    assert!(out.join("report.json").is_file());
}

#[test]
fn bad_exponent_is_a_usage_error_with_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "q.json", "{\n  \"name\": \"bad\",\n  \"params\": {\n    \"q\": 1.0\n  }\n}\n");
    let o = sparselab(&["run", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 4: q:"), "{err}");
}

#[test]
fn unknown_suite_lists_the_registry() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "u.json", r#"{"name": "u", "suites": ["no-such-suite"]}"#);
    let o = sparselab(&["run", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("mq-sparse"));
}

#[test]
fn missing_config_is_a_usage_error() {
    let o = sparselab(&["run", "/nonexistent/config.json"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn corrupted_dump_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "instance.json", "{ not json");
    let o = sparselab(&["replay", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());
}

#[test]
fn list_suites_names_every_suite_once() {
    let o = sparselab(&["list-suites"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    let names: Vec<&str> = text.lines().filter_map(|l| l.split_whitespace().next()).collect();
    assert_eq!(names.len(), 21);
    for n in ["mq-sparse", "cotlar", "cp-key-lemma", "d-condition"] {
        assert!(names.contains(&n), "{n}");
    }
}

#[test]
fn single_sparse_suite_passes_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.json", r#"{"name": "s", "resolutions": [6], "suites": ["mq-sparse"]}"#);
    let out = dir.path().join("out");
    let o = sparselab(&["run", &cfg, "--out", out.to_str().unwrap(), "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(String::from_utf8_lossy(&o.stdout).contains("PASS mq-sparse"));
    assert!(out.join("tables/mq-sparse.csv").is_file());
}
