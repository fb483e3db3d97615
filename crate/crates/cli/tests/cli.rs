use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn daval(args: &[&str]) -> Output {
    daval_env(args, &[])
}

fn daval_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_daval"));
    cmd.args(args).env_remove("DAVAL_SEED");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("daval runs")
}

fn demo(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("demo").join(name).to_string_lossy().into_owned()
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn qc_counts_markdown_has_triage_layout() {
    let out = daval(&["qc", "--counts", "40,5,5,10,85,5", "--format", "md"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for row in
        ["| Positive | 40 | 10 | 0.8000", "| Negative | 5 | 85 |", "| Ungradable | 5 | 5 |", "| Worst Case Scenario |"]
    {
        assert!(text.contains(row), "{row} missing from\n{text}");
    }
    assert!(text.contains("```json"));
}

#[test]
fn qc_rejects_wrong_cell_count() {
    let out = daval(&["qc", "--counts", "1,2,3"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn accuracy_block_shape() {
    let report = json(&daval(&["accuracy", "--data", &demo("demo.csv"), "--threshold", "0.5", "--goal", "0.6"]));
    let block = &report["results"][0];
    assert_eq!(block["analysis"], "accuracy");
    let sens = &block["result"]["accuracy"]["metrics"]["sensitivity"];
    for key in ["estimate", "lower", "upper", "n", "x"] {
        assert!(!sens[key].is_null(), "sensitivity.{key} missing");
    }
    assert_eq!(block["result"]["accuracy"]["goal_tests"]["sensitivity"]["reject"], true);
}

#[test]
fn missing_column_is_a_validation_failure() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "d.csv", "subject_id,truth,output\ns1,pos,pos\ns2,neg,neg\n");
    let out = daval(&["survival", "--data", &data, "--horizon", "5"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing column"));
}

#[test]
fn failed_analysis_exits_two_with_report() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "d.csv", "subject_id,truth,score\ns1,pos,0.9\ns2,pos,0.4\ns3,pos,0.7\n");
    let out = daval(&["riskscore", "--data", &data]);
    assert_eq!(out.status.code(), Some(2));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["results"][0]["error"].as_str().unwrap().contains("both outcome classes"));
}

#[test]
fn seed_from_environment_matches_flag() {
    let plan = demo("demo_plan.json");
    let by_flag = daval(&["run", "--plan", &plan, "--seed", "7"]);
    let by_env = daval_env(&["run", "--plan", &plan], &[("DAVAL_SEED", "7")]);
    assert_eq!(by_flag.stdout, by_env.stdout);
    assert_eq!(json(&by_flag)["seed"], 7);
    let other = daval(&["run", "--plan", &plan, "--seed", "8"]);
    assert_ne!(by_flag.stdout, other.stdout);
}

#[test]
fn simulate_then_analyse() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sim.csv").to_string_lossy().into_owned();
    let args = ["simulate", "binary", "--n", "400", "--sensitivity", "0.9", "--specificity", "0.8", "--output", &csv];
    assert!(daval(&[&args[..], &["--seed", "3"]].concat()).status.success());
    let first = std::fs::read(&csv).unwrap();
    assert!(daval(&[&args[..], &["--seed", "3"]].concat()).status.success());
    assert_eq!(first, std::fs::read(&csv).unwrap());

    let report = json(&daval(&["accuracy", "--data", &csv]));
    let sens = report["results"][0]["result"]["accuracy"]["metrics"]["sensitivity"]["estimate"].as_f64().unwrap();
    assert!((sens - 0.9).abs() < 0.08, "{sens}");
}

#[test]
fn simulated_survival_feeds_survival_command() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("surv.csv").to_string_lossy().into_owned();
    let sim =
        daval(&["simulate", "survival", "--n", "300", "--log-hr", "1.0", "--noise-covariates", "z", "--output", &csv]);
    assert!(sim.status.success());
    let out_dir = dir.path().join("out");
    let out = daval(&[
        "survival",
        "--data",
        &csv,
        "--groups-by",
        "x",
        "--horizon",
        "5",
        "--baseline-covariates",
        "z",
        "--added-covariates",
        "x",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    let survival = &report["results"][0]["result"]["survival"];
    assert!(survival["logrank"]["p_value"].as_f64().unwrap() < 0.01);
    assert!(survival["cox"]["lrt"]["p_value"].as_f64().unwrap() < 0.01);
    let km = std::fs::read_to_string(out_dir.join("km.csv")).unwrap();
    assert!(km.starts_with("group,time,survival,lower,upper,at_risk\n"));
}

#[test]
fn agreement_and_precision_on_demo() {
    let data = demo("demo.csv");
    let report = json(&daval(&["agreement", "--data", &data, "--y", "reference_score", "--lambda", "1"]));
    let ba = &report["results"][0]["result"]["agreement"]["bland_altman"];
    assert!(ba["loa_lower"].as_f64().unwrap() < ba["loa_upper"].as_f64().unwrap());

    let report = json(&daval(&["precision", "--data", &data, "--condition-by", "operator"]));
    let p = &report["results"][0]["result"]["precision"];
    assert!(p["reproducibility_sd"].as_f64().unwrap() >= p["repeatability_sd"].as_f64().unwrap());
}

#[test]
fn markdown_report_to_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out =
        daval(&["run", "--plan", &demo("demo_plan.json"), "--format", "md", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    let md = std::fs::read_to_string(dir.path().join("report.md")).unwrap();
    for section in
        ["## Binary accuracy", "## QC triage", "## Risk score", "## Agreement", "## Precision", "## Survival"]
    {
        assert!(md.contains(section), "{section}");
    }
    for csv in ["roc.csv", "calibration.csv", "dca.csv", "km.csv", "bland_altman.csv"] {
        assert!(dir.path().join(csv).exists(), "{csv}");
    }
}
