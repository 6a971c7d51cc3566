// SPDX-License-Identifier: Apache-2.0

//! End-to-end runs of the `mcconv` binary on the fixtures in `tests/fixtures`.

use std::path::PathBuf;
use std::process::Command;

use serde_json::Value;

fn fixture(name: &str) -> String {
    let mut p = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    p.push("tests/fixtures");
    p.push(name);
    p.to_string_lossy().into_owned()
}

/// Runs the binary and returns (exit code, raw stdout, parsed report).
fn run(args: &[&str]) -> (i32, String, Value) {
    let out = Command::new(env!("CARGO_BIN_EXE_mcconv")).args(args).output().expect("binary runs");
    let text = String::from_utf8(out.stdout).expect("utf-8 report");
    let report: Value = serde_json::from_str(&text).unwrap_or_else(|e| panic!("not JSON ({e}): {text}"));
    (out.status.code().unwrap_or(-1), text, report)
}

fn result(args: &[&str]) -> Value {
    let (code, _, report) = run(args);
    assert_eq!(code, 0, "{report}");
    assert_floats_only_in_approx(&report, "");
    report["result"].clone()
}

fn text(v: &Value) -> &str {
    v["text"].as_str().unwrap_or_else(|| panic!("no exact value in {v}"))
}

/// Walks a report and fails on any float outside a field named `approx_*`.
fn assert_floats_only_in_approx(v: &Value, key: &str) {
    match v {
        Value::Number(n) if !(n.is_i64() || n.is_u64()) => {
            assert!(key.starts_with("approx_"), "float {n} under key {key:?}")
        }
        Value::Array(items) => items.iter().for_each(|x| assert_floats_only_in_approx(x, key)),
        Value::Object(map) => map.iter().for_each(|(k, x)| assert_floats_only_in_approx(x, k)),
        _ => {}
    }
}

#[test]
fn charsum_quadratic_over_f3_squares_to_minus_three() {
    let r = result(&["charsum", "--p", "3", "--m", "1", "--chi-order", "2"]);
    assert_eq!(text(&r["gauss_sum_squared"]), "-3");
    assert_eq!(text(&r["chi_minus_one"]), "-1");
    assert_eq!(r["pair_identity_holds"], true);
}

#[test]
fn charsum_reports_the_jacobi_relation() {
    let r = result(&["charsum", "--p", "7", "--chi", "2", "--chi2", "2"]);
    assert_eq!(r["jacobi"]["relation_holds"], true);
}

#[test]
fn every_report_echoes_the_conventions() {
    let (_, _, report) = run(&["--eigenspace-weight", "top", "--quotient-twist", "1", "charsum", "--p", "5", "--chi", "1"]);
    assert_eq!(report["conventions"]["eigenspace_weight"], "top");
    assert_eq!(report["conventions"]["quotient_twist"], 1);
    assert_eq!(report["command"], "charsum");
}

#[test]
fn malformed_sheaf_is_a_schema_error() {
    let dir = std::env::temp_dir().join(format!("mcconv-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let bad = dir.join("bad.json");
    std::fs::write(&bad, "{\"rank\": 1,").unwrap();
    let (code, _, report) = run(&["det", "--input", bad.to_str().unwrap(), "--chi", "2", "--y", "3"]);
    assert_eq!(code, 2);
    assert_eq!(report["error"]["code"], "SchemaViolation");
    assert!(report.get("result").is_none());
}

#[test]
fn determinants_agree_with_the_oracle() {
    let sheaf = fixture("three_point_f5.json");
    let explicit = fixture("three_point_explicit.json");
    for y in ["3", "4"] {
        let det = result(&["det", "--input", &sheaf, "--chi", "2", "--y", y]);
        let oracle =
            result(&["oracle", "--sheaf", &explicit, "--base", "5,1", "--y", y, "--chi", "2", "--kmax", "6", "--charpoly"]);
        assert_eq!(oracle["dimension"], 3);
        assert_eq!(det["det_h1c"]["value"], oracle["det"]["value"], "y = {y}");
    }
}

#[test]
fn quadratic_hypotheses_hold_on_a_three_point_sheaf() {
    let r = result(&["det", "--input", &fixture("three_point_f5.json"), "--chi", "2", "--y", "3", "--quadratic"]);
    assert_eq!(r["quadratic"]["output"]["rank"], 2);
    assert_eq!(r["quadratic"]["output"]["unresolved"], Value::Array(vec![]));
    // The two-point sheaf is unramified at infinity, so hypothesis (i) fails without aborting the report.
    let r = result(&["det", "--input", &fixture("kummer_f5.json"), "--chi", "2", "--y", "2", "--quadratic"]);
    assert_eq!(r["quadratic"]["unavailable"]["code"], "HypothesisFailed");
    assert_eq!(r["det_h1c"]["unavailable"]["code"], "NotStandardSituation");
}

#[test]
fn mc_output_round_trips_through_the_file() {
    let dir = std::env::temp_dir().join(format!("mcconv-cli-mc-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let out = dir.join("mc.json");
    let r = result(&["mc", "--chi", "2", "--input", &fixture("three_point_f5.json"), "--output", out.to_str().unwrap()]);
    assert_eq!(r["rank"], 2);
    let written: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(written, r["sheaf"]);
    let back = result(&["mc", "--chi", "2", "--input", out.to_str().unwrap()]);
    assert_eq!(back["rank"], 1);
    let rig = result(&["rigidity", "--input", out.to_str().unwrap()]);
    assert_eq!(rig["rigidity_index"], 2);
}

#[test]
fn legendre_pipeline_cross_checks_with_the_oracle() {
    let r = result(&["pipeline", "--script", &fixture("legendre.json"), "--base", "5,1", "--with-oracle"]);
    assert_eq!(r["final_state"], serde_json::from_str::<Value>(&std::fs::read_to_string(fixture("legendre_f5.json")).unwrap()).unwrap());
    assert_eq!(r["final_state"]["rank"], 2);
    // A mismatch between the tracks is a hard error, so only pass, filled or skipped can appear here.
    let mc_step = &r["steps"][2];
    let passes = mc_step["checks"].as_array().unwrap().iter().filter(|c| c["status"] == "pass").count();
    assert!(passes >= 2, "{mc_step}");
}

#[test]
fn epsilon_at_a_point_and_at_infinity() {
    let sheaf = fixture("three_point_f5.json");
    let inf = result(&["eps", "--input", &sheaf, "--point", "inf"]);
    let zero = result(&["eps", "--input", &sheaf, "--point", "0"]);
    assert_eq!(inf["point"], "infinity");
    assert!(inf["epsilon0"].get("value").is_some());
    assert!(zero["epsilon0"].get("value").is_some());
    let (code, _, report) = run(&["eps", "--input", &sheaf, "--point", "2"]);
    assert_eq!(code, 0, "{report}");
    // 3 is not a singular point of the three-point sheaf.
    let (code, _, report) = run(&["eps", "--input", &sheaf, "--point", "3"]);
    assert_eq!(code, 2);
    assert_eq!(report["error"]["code"], "SchemaViolation");
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let args = ["det", "--input", &fixture("three_point_f5.json"), "--chi", "2", "--y", "4", "--quadratic"];
    let (_, a, _) = run(&args);
    let (_, b, _) = run(&args);
    assert_eq!(a, b);
}

#[test]
fn check_runs_selected_suites_and_rejects_unknown_names() {
    let r = result(&["check", "--only", "AC-1"]);
    assert_eq!(r["all_passed"], true);
    assert_eq!(r["outcomes"][0]["name"], "AC-1");
    let listed = result(&["check", "--list"]);
    assert!(listed["checks"].as_array().unwrap().len() >= 9);
    let (code, _, report) = run(&["check", "--only", "AC-0"]);
    assert_eq!(code, 2);
    assert_eq!(report["error"]["code"], "SchemaViolation");
}
