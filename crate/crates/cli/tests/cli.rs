//! End-to-end checks of the binary: exit-code contract (0 pass, 2 failed
//! mathematical check, 1 usage/IO), file round trips, and report shapes.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_distdim")
}

fn tmpdir(tag: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("distdim-cli-{}-{tag}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("binary runs")
}

fn write_norm(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

#[test]
fn usage_errors_exit_one() {
    // invalid density
    let out = run(&[
        "build-set", "--rho", "1.5", "--blocks", "3", "--out", "/tmp/never",
    ]);
    assert_eq!(out.status.code(), Some(1), "{out:?}");
    // unknown flag
    let out = run(&["build-set", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
    // missing input file
    let out = run(&[
        "covering-profile",
        "--cloud",
        "/nonexistent/cloud.csv",
        "--levels",
        "1..4",
        "--out",
        "/tmp/never.csv",
    ]);
    assert_eq!(out.status.code(), Some(1));
    // help exits zero
    let out = run(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn pipeline_build_profile_jarvenpaa() {
    let dir = tmpdir("pipeline");
    let prefix = dir.join("set");
    let out = run(&[
        "build-set",
        "--q",
        "3",
        "--rho",
        "0.5",
        "--blocks",
        "3",
        "--d",
        "2",
        "--depth",
        "8",
        "--no-timestamp",
        "--out",
        prefix.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let cloud = prefix.with_extension("cloud.csv");
    assert!(cloud.exists() && prefix.with_extension("schedule.txt").exists());

    let profile = dir.join("profile.csv");
    let out = run(&[
        "covering-profile",
        "--cloud",
        cloud.to_str().unwrap(),
        "--q",
        "3",
        "--levels",
        "1..8",
        "--no-timestamp",
        "--out",
        profile.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&profile).unwrap();
    assert!(text.contains("delta,count,provenance"));
    assert!(text.lines().any(|l| l.starts_with("# seed=")));

    let report = dir.join("jarvenpaa.json");
    let out = run(&[
        "jarvenpaa",
        "--cloud",
        cloud.to_str().unwrap(),
        "--n",
        "1",
        "--q",
        "3",
        "--levels",
        "1..8",
        "--no-timestamp",
        "--out",
        report.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["report"]["margin_exact"], "0");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn distance_profile_with_pin() {
    let dir = tmpdir("pin");
    let prefix = dir.join("set");
    run(&[
        "build-set", "--q", "3", "--rho", "1.0", "--blocks", "2", "--d", "2", "--depth", "6",
        "--no-timestamp", "--out", prefix.to_str().unwrap(),
    ]);
    let norm = write_norm(
        &dir,
        "linf.json",
        r#"{"polyhedral": {"q": 3, "facets": [["1/3","0"],["0","1/3"]]}}"#,
    );
    let profile = dir.join("pinned.csv");
    let out = run(&[
        "distance-profile",
        "--cloud",
        prefix.with_extension("cloud.csv").to_str().unwrap(),
        "--norm",
        norm.to_str().unwrap(),
        "--pin",
        "1/3,2/9",
        "--q",
        "3",
        "--levels",
        "1..6",
        "--no-timestamp",
        "--out",
        profile.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&profile).unwrap();
    assert!(text.contains(r#"source={"Pinned":{"pin":["1/3","2/9"]}}"#));
    assert!(text.contains("1/3,1,grid"));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn failed_math_check_exits_two() {
    // the single-pin family is not weakly transversal: its exponent is near
    // one, so gating at 0.1 must fail with exit code 2
    let dir = tmpdir("gate");
    let norm = write_norm(&dir, "l2.json", r#"{"lp": {"p": 2.0, "weights": [1.0, 1.0]}}"#);
    let out = run(&[
        "fiber-scan",
        "--norm",
        norm.to_str().unwrap(),
        "--pins",
        "0.5,-0.8",
        "--grid",
        "400",
        "--deltas",
        "2^-4,2^-5,2^-6,2^-7",
        "--xi",
        "16",
        "--max-exponent",
        "0.1",
        "--no-timestamp",
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stdout));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn sharpness_certification_failure_exits_two() {
    // a diagonal facet couples the coordinates: distance digits spill below
    // the first scheduled level, which the top-padded envelope cannot
    // contain, so certification must fail and the exit code must be 2
    let dir = tmpdir("sharp-fail");
    let norm = write_norm(
        &dir,
        "diag.json",
        r#"{"polyhedral": {"q": 3, "facets": [["2/3","0"],["0","2/3"],["2/3","2/3"]]}}"#,
    );
    let out = run(&[
        "verify-sharpness",
        "--q",
        "3",
        "--rho",
        "0.5",
        "--blocks",
        "3",
        "--d",
        "2",
        "--norm",
        norm.to_str().unwrap(),
        "--sample-points",
        "200",
        "--pairs",
        "2000",
        "--no-timestamp",
        "--out",
        dir.join("report.json").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stdout));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(json["envelope"]["certified"], false);
    assert!(json["envelope"]["counterexample"].is_string());
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn sharpness_passes_for_axis_norm() {
    let dir = tmpdir("sharp-ok");
    let norm = write_norm(
        &dir,
        "linf.json",
        r#"{"polyhedral": {"q": 3, "facets": [["1/3","0"],["0","1/3"]]}}"#,
    );
    let out = run(&[
        "verify-sharpness",
        "--q",
        "3",
        "--rho",
        "0.5",
        "--blocks",
        "4",
        "--d",
        "2",
        "--norm",
        norm.to_str().unwrap(),
        "--sample-points",
        "500",
        "--pairs",
        "5000",
        "--no-timestamp",
        "--out",
        dir.join("report.json").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(json["envelope"]["certified"], true);
    assert_eq!(json["meta"]["pad"], 4);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn transversality_report_shape() {
    let dir = tmpdir("transreport");
    let norm = write_norm(&dir, "l3.json", r#"{"lp": {"p": 3.0, "weights": [1.0, 1.0]}}"#);
    let report = dir.join("report.json");
    let out = run(&[
        "transversality-report",
        "--norm",
        norm.to_str().unwrap(),
        "--eps",
        "0.1,0.01",
        "--budget",
        "5000",
        "--no-timestamp",
        "--out",
        report.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let smooth = &json["sections"]["smooth"];
    assert!(smooth["lambda"].as_f64().unwrap() > 0.0);
    assert!(smooth["eta"].as_f64().unwrap() < 1.0);
    assert_eq!(smooth["direction_membership"]["pass"], true);
    assert_eq!(smooth["duality"]["pass"], true);
    // h table monotone in eps
    let h: Vec<f64> = smooth["modulus_h"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["h"].as_f64().unwrap())
        .collect();
    assert!(h[0] >= h[1]);
    std::fs::remove_dir_all(&dir).ok();
}
