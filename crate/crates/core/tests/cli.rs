use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn confnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_confnet")).args(args).output().unwrap()
}

fn run_json(manifest: &str, command: &str) -> (i32, Value) {
    let path = fixture(manifest);
    let out = confnet(&[
        "--manifest",
        path.to_str().unwrap(),
        "--command",
        command,
        "--format",
        "json",
    ]);
    let v = serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("{e}: {}", String::from_utf8_lossy(&out.stderr));
    });
    (out.status.code().unwrap(), v)
}

fn verdict<'a>(report: &'a Value, name: &str) -> &'a Value {
    report["verdicts"]
        .as_array()
        .unwrap()
        .iter()
        .find(|v| v["name"] == name)
        .unwrap_or_else(|| panic!("no verdict {name}"))
}

#[test]
fn polar_is_warped() {
    let (code, r) = run_json("polar.json", "classify");
    assert_eq!(code, 0);
    assert_eq!(r["outcome"], "pass");
    assert_eq!(verdict(&r, "net0.WP")["verdict"], "holds");
    assert_eq!(verdict(&r, "net0.CP")["verdict"], "holds");
}

#[test]
fn twisted_control_fails() {
    let (code, r) = run_json("twisted_control.json", "classify");
    assert_eq!(code, 2);
    let cwp = verdict(&r, "net0.CWP");
    assert_eq!(cwp["verdict"], "fails");
    assert!(cwp["residual"].as_f64().unwrap() > 1e-3);
}

#[test]
fn borderline_metric_is_inconclusive() {
    let (code, r) = run_json("near_warped.json", "classify");
    assert_eq!(code, 3);
    assert_eq!(r["outcome"], "inconclusive");
}

#[test]
fn product_spec_verifies() {
    let (code, r) = run_json("warped_product.json", "verify-product");
    assert_eq!(code, 0);
    assert!(r["product"]["connection_identity"].as_f64().unwrap() <= 1e-9);
}

#[test]
fn factorization_recovers_closed_forms() {
    let (code, r) = run_json("conformal_polar.json", "factorize");
    assert_eq!(code, 0);
    let f = &r["factorizations"][0];
    assert!(f["reconstruction_error"].as_f64().unwrap() <= 1e-6);
    assert!(f["path_consistency"].as_f64().unwrap() <= 1e-7);
}

#[test]
fn torus_codazzi_structure() {
    let (code, r) = run_json("torus.json", "codazzi");
    assert_eq!(code, 0);
    let c = &r["codazzi"][0]["report"];
    assert_eq!(c["rank_lambda"], 1);
    assert_eq!(c["rank_mu"], 1);
    assert!(c["codazzi"]["max_residual"].as_f64().unwrap() <= 1e-10);
}

#[test]
fn json_floats_are_scientific() {
    let path = fixture("polar.json");
    let out = confnet(&["--manifest", path.to_str().unwrap(), "--format", "json"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("\"tolerance\":1.000000000000e-8"));
    assert_eq!(text.lines().count(), 1);
}

#[test]
fn text_output_lists_every_verdict() {
    let path = fixture("polar.json");
    let out = confnet(&["--manifest", path.to_str().unwrap()]);
    let text = String::from_utf8(out.stdout).unwrap();
    let flags: Vec<&str> = text
        .lines()
        .filter_map(|l| l.strip_prefix("net0."))
        .map(|l| l.split_whitespace().next().unwrap())
        .collect();
    assert_eq!(flags, ["TP", "WP", "QW", "CQW", "CQW0", "CWP", "CP", "CWP_block0"]);
    assert!(text.contains("outcome   pass"));
    assert!(text.contains("wall-clock"));
}

#[test]
fn overrides_change_sampling() {
    let path = fixture("polar.json");
    let out = confnet(&[
        "--manifest",
        path.to_str().unwrap(),
        "--format",
        "json",
        "--samples",
        "3",
        "--seed",
        "99",
        "--tolerance",
        "1e-6",
    ]);
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["sampling"]["random"], 3);
    assert_eq!(r["sampling"]["seed"], 99);
    assert_eq!(r["tolerance"].as_f64(), Some(1e-6));
}

#[test]
fn runs_are_deterministic() {
    let path = fixture("torus.json");
    let args = [
        "--manifest",
        path.to_str().unwrap(),
        "--command",
        "codazzi",
        "--format",
        "json",
    ];
    assert_eq!(confnet(&args).stdout, confnet(&args).stdout);
}

#[test]
fn errors_exit_with_one() {
    let out = confnet(&["--manifest", "/nonexistent/manifest.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("confnet: "));

    let out = confnet(&["--command", "classify"]);
    assert_eq!(out.status.code(), Some(1));

    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    let bad = dir.join("bad_manifest.json");
    std::fs::write(
        &bad,
        r#"{"chart": {"dim": 2, "domain": [[0.5, 3], [-3, 3]]}, "metric": {"components": [["1", "0"], ["0", "q^2"]]}}"#,
    )
    .unwrap();
    let out = confnet(&["--manifest", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/metric/components/1/1"));
}

#[test]
fn selftest_needs_no_manifest() {
    let out = confnet(&["--command", "selftest", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["selftest"].as_array().unwrap().len(), 11);
}
