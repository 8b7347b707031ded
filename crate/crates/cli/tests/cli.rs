use std::process::{Command, Output};

use serde_json::Value;
use waring_core::tensor_file::{Coefficients, TensorFile};

fn waring(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_waring")).args(args).env_remove("WARING_PRIME").output().unwrap()
}

fn json(args: &[&str]) -> Value {
    let out = waring(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn enumerate_two_factor_rows() {
    let out = waring(&["enumerate", "--corollary", "2", "--dmax", "5"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines, ["n,r,d1,d2,k,ncoeff,assumption1_ok", "2,1,4,5,9,30,", "2,1,5,5,11,36,"]);
}

#[test]
fn enumerate_writes_csv_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    let out = waring(&["enumerate", "--corollary", "3", "--dmax", "14", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(path).unwrap();
    assert!(text.starts_with("n,r,d1,d2,d3,k,ncoeff,assumption1_ok\n"));
    assert!(text.lines().any(|l| l == "3,1,3,3,14,59,240,true"));
}

#[test]
fn invalid_format_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    let out = waring(&["defect", "--format", "r=1,1;d=4", "--k", "3", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!path.exists());
    assert_eq!(waring(&["defect", "--k", "3"]).status.code(), Some(2));
    assert_eq!(waring(&["--prime", "91", "defect", "--format", "r=2;d=2", "--k", "1"]).status.code(), Some(2));
}

#[test]
fn operational_errors_exit_one() {
    let out = waring(&["certify", "--format", "r=1;d=3,3,14", "--s", "61"]);
    assert_eq!(out.status.code(), Some(1));
    let out = waring(&["pipeline", "--corollary", "2", "--d", "4,4"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn defective_verdict_still_succeeds() {
    let v = json(&["defect", "--format", "r=2;d=2", "--k", "1", "--json"]);
    assert_eq!(v["result"]["status"], "deficient");
    assert_eq!(v["result"]["actual_dim"], 1);
}

#[test]
fn report_carries_audit_trail() {
    let v = json(&["--seed", "17", "defect", "--format", "r=1,1;d=4,5", "--k", "9", "--trials", "2", "--json"]);
    assert_eq!(v["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(v["seed"], 17);
    assert_eq!(v["prime"], 2_147_483_647u64);
    assert_eq!(v["config"]["global"]["trials"], 2);
    assert_eq!(v["config"]["command"]["subcommand"], "defect");
    assert_eq!(v["config"]["command"]["format"], "r=1,1;d=4,5");
    assert_eq!(v["result"]["status"], "expected");
    assert_eq!(v["result"]["rank"], 30);
}

#[test]
fn prime_from_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_waring"))
        .args(["defect", "--format", "r=2;d=5", "--k", "6", "--json"])
        .env("WARING_PRIME", "1000003")
        .output()
        .unwrap();
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["prime"], 1000003);
    assert_eq!(v["result"]["status"], "expected");
}

#[test]
fn config_file_supplies_flags_and_command_line_wins() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# shared settings\n--seed 5\n--trials 2\n").unwrap();
    let c = cfg.to_str().unwrap();
    let v = json(&["--config", c, "defect", "--format", "r=2;d=5", "--k", "6", "--json"]);
    assert_eq!((v["seed"].as_u64(), v["config"]["global"]["trials"].as_u64()), (Some(5), Some(2)));
    let v = json(&["--seed", "8", "--config", c, "defect", "--format", "r=2;d=5", "--k", "6", "--json"]);
    assert_eq!(v["seed"], 8);
}

#[test]
fn pipeline_aggregates_all_stages() {
    let v = json(&["pipeline", "--corollary", "2", "--d", "4,5", "--json"]);
    let p = &v["result"]["pipeline"];
    assert_eq!(p["case"]["k"], 9);
    assert_eq!(p["secant"]["status"], "expected");
    assert_eq!(p["weak_defectivity"]["hessian_ok"].as_array().unwrap().len(), 9);
    assert_eq!(p["nef"], true);
    assert_eq!(p["hypotheses_verified"], true);
    assert!(v["result"]["decompositions"].is_null());
}

#[test]
fn symmetric_pipeline_counts_decompositions() {
    let v = json(&["pipeline", "--corollary", "symmetric", "--r", "2", "--d", "5", "--starts", "12", "--json"]);
    assert_eq!(v["result"]["pipeline"]["case"]["nu_expected"], "unique");
    assert_eq!(v["result"]["pipeline"]["hypotheses_verified"], true);
    assert_eq!(v["result"]["decompositions"]["nu_est"], 1);
}

#[test]
fn saved_target_matches_report() {
    let dir = tempfile::tempdir().unwrap();
    let t = dir.path().join("target.json");
    let v = json(&[
        "decompose", "--format", "r=1,1;d=3,3", "--k", "4", "--starts", "10", "--save-target", t.to_str().unwrap(), "--json",
    ]);
    let file = TensorFile::read(&t).unwrap();
    let Coefficients::Complex(c) = file.coeffs else { panic!("complex tensor expected") };
    let reported = v["result"]["target"].as_array().unwrap();
    assert_eq!(c.len(), reported.len());
    for (a, b) in c.iter().zip(reported) {
        assert_eq!(a.re, b[0].as_f64().unwrap());
        assert_eq!(a.im, b[1].as_f64().unwrap());
    }
}

#[test]
fn reports_do_not_depend_on_worker_count() {
    for args in [
        vec!["--seed", "4", "certify", "--format", "r=1;d=3,3,6", "--s", "20", "--json"],
        vec!["--seed", "4", "decompose", "--format", "r=2;d=5", "--k", "6", "--starts", "16", "--json"],
        vec!["--seed", "4", "weakdefect", "--format", "r=1;d=2,2,2", "--points", "2", "--starts", "40", "--json"],
    ] {
        let mut one = args.clone();
        one.extend(["--jobs", "1"]);
        let mut eight = args.clone();
        eight.extend(["--jobs", "8"]);
        let a = waring(&one);
        let b = waring(&eight);
        assert!(a.status.success() && b.status.success());
        assert_eq!(a.stdout, b.stdout, "{args:?}");
        assert_eq!(waring(&args).stdout, a.stdout);
    }
}
