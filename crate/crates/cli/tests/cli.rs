use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn opforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_opforge"))
        .args(args)
        .env_remove("OPFORGE_JOBS")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn scratch(name: &str, contents: &str) -> PathBuf {
    let p = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name);
    std::fs::write(&p, contents).unwrap();
    p
}

#[test]
fn ce_of_sl2() {
    let out = opforge(&["ce", "--input", "sl2", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["pass"], true);
    assert_eq!(v["result"]["betti"], serde_json::json!([1, 0, 0, 1]));
}

#[test]
fn ce_of_heisenberg() {
    let out = opforge(&["ce", "--input", "heisenberg3", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(
        json(&out)["result"]["betti"],
        serde_json::json!([1, 2, 2, 1])
    );
}

#[test]
fn kappa_is_twisting_through_arity_six() {
    let out = opforge(&["mc-check", "--max-arity", "6", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["pass"], true);
    assert_eq!(v["truncation"]["max_arity"], 6);
}

#[test]
fn sign_flip_is_caught_in_arity_three() {
    let out = opforge(&[
        "mc-check",
        "--debug-inject",
        "kappa-sign-flip",
        "--format",
        "json",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let v = json(&out);
    assert_eq!(v["pass"], false);
    assert_eq!(v["result"]["first_failure"], 3);
}

#[test]
fn koszul_check_verdicts_agree() {
    let out = opforge(&["koszul-check", "--max-arity", "4", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["result"]["verdicts"]["agree"], true);
}

#[test]
fn homology_of_a_file() {
    let p = scratch(
        "sphere.json",
        r#"{"dims": {"0": 2, "1": 1}, "diff": {"1": [[0, 0, "1"], [1, 0, "-1/2"]]}}"#,
    );
    let out = opforge(&[
        "homology",
        "--input",
        p.to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["result"]["homology"], serde_json::json!({"0": 1}));
    assert_eq!(v["result"]["euler_characteristic"], 1);
}

#[test]
fn not_a_complex_is_an_input_error() {
    let p = scratch(
        "not_a_complex.json",
        r#"{"dims": {"0": 1, "1": 1, "2": 1}, "diff": {"1": [[0,0,"1"]], "2": [[0,0,"1"]]}}"#,
    );
    let out = opforge(&["homology", "--input", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("NotAComplex"), "{err}");
    let out = opforge(&[
        "homology",
        "--input",
        p.to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert_eq!(json(&out)["error"]["kind"], "NotAComplex");
}

#[test]
fn parse_errors_name_the_line() {
    let p = scratch("broken.json", "{\n  \"dims\": {\"0\": 1,\n}\n");
    let out = opforge(&[
        "homology",
        "--input",
        p.to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let v = json(&out);
    assert_eq!(v["error"]["kind"], "ParseError");
    assert!(
        v["error"]["message"].as_str().unwrap().contains("line 3"),
        "{v}"
    );
}

#[test]
fn inapplicable_fault_is_a_usage_error() {
    let out = opforge(&["homology", "--input", "sl2", "--debug-inject", "cone-sign"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_arguments_exit_two() {
    assert_eq!(
        opforge(&["homology", "--degrees", "3:1"]).status.code(),
        Some(2)
    );
    assert_eq!(
        opforge(&["mc-check", "--max-arity", "0"]).status.code(),
        Some(2)
    );
    assert_eq!(
        opforge(&["ce", "--input", "no-such-thing"]).status.code(),
        Some(2)
    );
}

#[test]
fn output_is_deterministic_across_thread_counts() {
    for cmd in [
        &["cobar", "--input", "sl2", "--max-weight", "3"][..],
        &["bar", "--input", "heisenberg3", "--max-weight", "3"][..],
        &["koszul-check", "--max-arity", "4"][..],
        &["tangent-roundtrip", "--input", "sl2"][..],
    ] {
        let mut runs = Vec::new();
        for jobs in ["1", "4", "4"] {
            let mut args = cmd.to_vec();
            args.extend(["--format", "json", "--jobs", jobs]);
            let out = opforge(&args);
            assert_eq!(out.status.code(), Some(0), "{cmd:?}");
            runs.push(out.stdout);
        }
        assert_eq!(runs[0], runs[1], "{cmd:?}");
        assert_eq!(runs[1], runs[2], "{cmd:?}");
    }
}

#[test]
fn selftest_detects_a_planted_cone_sign() {
    let out = opforge(&[
        "selftest",
        "--debug-inject",
        "cone-sign",
        "--format",
        "json",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let v = json(&out);
    let failed: Vec<u64> = v["result"]["criteria"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["pass"] == false)
        .map(|c| c["id"].as_u64().unwrap())
        .collect();
    assert!(failed.contains(&1), "{failed:?}");
}
