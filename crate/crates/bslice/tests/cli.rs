use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name).display().to_string()
}

fn bslice(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bslice")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is a JSON report")
}

#[test]
fn builtin_list_and_show() {
    let out = bslice(&["builtin", "list"]);
    assert!(out.status.success());
    let names: Vec<_> = String::from_utf8(out.stdout).unwrap().lines().map(str::to_string).collect();
    assert_eq!(names.len(), 4);
    for name in ["torus_example", "curled_torus", "s2xs2", "tstar_g"] {
        assert!(names.iter().any(|n| n == name), "missing {name}");
    }
    let out = bslice(&["builtin", "show", "torus_example"]);
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().contains("[chart]"));
}

#[test]
fn builtin_run_passes() {
    let out = bslice(&["check", "builtin:torus_example"]);
    assert_eq!(out.status.code(), Some(0));
    let report = json(&out);
    assert_eq!(report["schema"], 1);
    assert_eq!(report["command"], "check");
    assert_eq!(report["status"], "pass");
}

#[test]
fn unknown_builtin_exits_4() {
    let out = bslice(&["check", "builtin:nope"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope"));
}

#[test]
fn missing_file_exits_4() {
    let out = bslice(&["check", "/nonexistent/scenario.bsl"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn parse_error_reports_line() {
    let out = bslice(&["run", &data("bad_parse.bsl")]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 9"));
}

#[test]
fn degenerate_form_has_witness() {
    let out = bslice(&["run", &data("degenerate.bsl")]);
    assert_eq!(out.status.code(), Some(2));
    let form = &json(&out)["tasks"][0]["forms"][0];
    assert_eq!(form["nondegenerate"], false);
    assert!(form["witness"].is_object());
}

#[test]
fn invariance_failure_names_element() {
    let out = bslice(&["run", &data("noninvariant.bsl")]);
    assert_eq!(out.status.code(), Some(2));
    let action = &json(&out)["tasks"][0]["actions"][0];
    assert_eq!(action["invariant"], false);
    assert_eq!(action["invariance_failures"][0]["label"], "(1 mod 2)");
}

#[test]
fn coarse_moser_flow_fails_certification() {
    let out = bslice(&["run", &data("moser_rough.bsl")]);
    assert_eq!(out.status.code(), Some(3));
    let report = json(&out);
    assert_eq!(report["status"], "certification_fail");
    let cert = &report["tasks"][0]["certification"];
    assert!(cert["residual"].as_f64().unwrap() > cert["threshold"].as_f64().unwrap());
}

#[test]
fn json_file_matches_stdout_and_repeats() {
    let path = std::env::temp_dir().join(format!("bslice-cli-{}.json", std::process::id()));
    let p = path.display().to_string();
    let first = bslice(&["invariants", "builtin:s2xs2", "--json", &p]);
    assert_eq!(first.status.code(), Some(0));
    let written = std::fs::read(&path).unwrap();
    std::fs::remove_file(&path).unwrap();
    assert_eq!(written, first.stdout);
    let second = bslice(&["invariants", "builtin:s2xs2", "--json", &p]);
    std::fs::remove_file(&path).unwrap();
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn anchor_override_replaces_anchors() {
    let out = bslice(&["invariants", "builtin:torus_example", "--anchor", "t=1/2,x=0.3,y=0.1"]);
    assert_eq!(out.status.code(), Some(0));
    let isotropy = json(&out)["tasks"][0]["isotropy"].as_array().unwrap().clone();
    assert_eq!(isotropy.len(), 1);
    let point = isotropy[0]["point"].as_array().unwrap();
    assert!(point.iter().any(|v| (v.as_f64().unwrap() - 0.3).abs() < 1e-12));
}

#[test]
fn seed_is_recorded() {
    let out = bslice(&["check", "builtin:curled_torus", "--seed", "99"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["seed"], 99);
}
