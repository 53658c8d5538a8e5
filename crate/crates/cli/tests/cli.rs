use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn titanic() -> String {
    root().join("data/titanic.csv").to_string_lossy().into_owned()
}

fn brl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_brl"))
        .args(args)
        .env_remove("BRL_JOBS")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = brl(args);
    assert!(
        out.status.success(),
        "brl {args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_string_lossy().into_owned()
}

fn quick_fit(dir: &TempDir, extra: &[&str]) -> String {
    let model = path(dir, "model.json");
    let mut args = vec![
        "fit", "--data", &titanic(), "--label-col", "survived", "--lambda", "3", "--eta", "1", "--seed", "7",
        "--iters", "2000", "--max-iters", "2000", "--output", &model,
    ]
    .into_iter()
    .map(String::from)
    .collect::<Vec<_>>();
    args.extend(extra.iter().map(|s| s.to_string()));
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    ok(&refs);
    model
}

#[test]
fn fit_writes_model_and_renders_list() {
    let dir = tempfile::tempdir().unwrap();
    let model = path(&dir, "model.json");
    let out = ok(&[
        "fit", "--data", &titanic(), "--label-col", "survived", "--lambda", "3", "--eta", "1", "--seed", "7",
        "--iters", "2000", "--max-iters", "2000", "--output", &model,
    ]);
    let text = stdout(&out);
    assert!(text.starts_with("if "), "{text}");
    assert!(text.lines().last().unwrap().starts_with("else probability of yes"));

    let json: Value = serde_json::from_str(&std::fs::read_to_string(&model).unwrap()).unwrap();
    assert_eq!(json["format"], "brl-model/1");
    assert_eq!(json["seed"], 7);
    assert_eq!(json["config"]["lambda"], 3.0);
    assert_eq!(json["config"]["command"], "fit");
    assert_eq!(json["label_names"], serde_json::json!(["no", "yes"]));
    assert!(json["ensemble"].is_null());
    let rules = json["rules"].as_array().unwrap();
    assert_eq!(rules.len() + 1, text.lines().count());
    for r in rules {
        let mean: f64 = r["mean"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).sum();
        assert!((mean - 1.0).abs() < 1e-12);
    }
}

#[test]
fn predict_point_and_posterior() {
    let dir = tempfile::tempdir().unwrap();
    let model = quick_fit(&dir, &["--keep-ensemble"]);
    let preds = path(&dir, "preds.csv");
    let out = ok(&["predict", "--model", &model, "--data", &titanic(), "--output", &preds]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("accuracy"));
    let text = std::fs::read_to_string(&preds).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "row,predicted,p_no,p_yes,matched_rule,explanation");
    assert_eq!(lines.count(), 2201);

    let out = ok(&["predict", "--model", &model, "--data", &titanic(), "--mode", "posterior"]);
    let text = stdout(&out);
    assert_eq!(text.lines().next().unwrap(), "row,predicted,p_no,p_yes");
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let (p0, p1): (f64, f64) = (f[2].parse().unwrap(), f[3].parse().unwrap());
        assert!((p0 + p1 - 1.0).abs() < 1e-9);
    }
}

#[test]
fn posterior_mode_needs_stored_ensemble() {
    let dir = tempfile::tempdir().unwrap();
    let model = quick_fit(&dir, &[]);
    let out = brl(&["predict", "--model", &model, "--data", &titanic(), "--mode", "posterior"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ensemble not stored"));
}

#[test]
fn inspect_shows_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let model = quick_fit(&dir, &[]);
    let text = stdout(&ok(&["inspect", "--model", &model]));
    assert!(text.contains("seed: 7"));
    assert!(text.contains("R-hat"));
    assert!(text.contains("else probability of yes"));
}

#[test]
fn exit_codes() {
    let missing = brl(&["fit", "--data", "/nonexistent.csv", "--label-col", "y"]);
    assert_eq!(missing.status.code(), Some(2));
    assert_eq!(brl(&["fit", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(brl(&["--help"]).status.code(), Some(0));
    let one_chain = brl(&["fit", "--data", &titanic(), "--label-col", "survived", "--chains", "1"]);
    assert_eq!(one_chain.status.code(), Some(1));
    let no_data = brl(&["mine"]);
    assert_eq!(no_data.status.code(), Some(1));
    let bad_label = brl(&["mine", "--data", &titanic(), "--label-col", "nope"]);
    assert_eq!(bad_label.status.code(), Some(2));
}

#[test]
fn strict_fit_reports_unconverged_chains() {
    let dir = tempfile::tempdir().unwrap();
    let out = brl(&[
        "fit", "--data", &titanic(), "--label-col", "survived", "--iters", "8", "--max-iters", "8", "--strict",
        "--output", &path(&dir, "m.json"),
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = path(&dir, "run.toml");
    std::fs::write(&config, format!("data = {:?}\nlabel-col = \"survived\"\nmin-support = 0.5\nmax-card = 1\n", titanic())).unwrap();
    let from_file = stdout(&ok(&["mine", "--config", &config]));
    let overridden = stdout(&ok(&["mine", "--config", &config, "--min-support", "0.05", "--max-card", "2"]));
    assert!(from_file.lines().count() < overridden.lines().count());
    assert!(from_file.lines().all(|l| !l.contains(" and ")));

    std::fs::write(&config, "lamda = 3\n").unwrap();
    assert_eq!(brl(&["mine", "--config", &config]).status.code(), Some(1));
}

#[test]
fn simulate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, truth) = (path(&dir, "a.csv"), path(&dir, "b.csv"), path(&dir, "truth.json"));
    ok(&["simulate", "--n", "200", "--seed", "3", "--output", &a, "--truth", &truth]);
    ok(&["simulate", "--n", "200", "--seed", "3", "--output", &b]);
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    assert_eq!(text.lines().count(), 201);
    assert_eq!(text.lines().next().unwrap().split(',').count(), 101);
    let truth: Value = serde_json::from_str(&std::fs::read_to_string(&truth).unwrap()).unwrap();
    assert_eq!(truth["true_list"].as_array().unwrap().len(), 5);
    assert_eq!(truth["thetas"].as_array().unwrap().len(), 6);
}

#[test]
fn cv_report_and_roc_files() {
    let dir = tempfile::tempdir().unwrap();
    let sim = path(&dir, "sim.csv");
    ok(&["simulate", "--n", "300", "--n-rules", "10", "--list-len", "2", "--seed", "1", "--output", &sim]);
    let report = path(&dir, "cv.json");
    let roc = path(&dir, "roc");
    let out = ok(&[
        "eval", "cv", "--data", &sim, "--label-col", "label", "--min-support", "0.2", "--max-card", "1",
        "--iters", "2000", "--max-iters", "2000", "--folds", "3", "--seed", "2", "--output", &report,
        "--roc-dir", &roc,
    ]);
    assert!(stdout(&out).contains("mean accuracy"));
    let json: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["format"], "brl-cv/1");
    assert_eq!(json["report"]["folds"].as_array().unwrap().len(), 3);
    assert_eq!(json["config"]["extra"]["folds"], "3");
    for f in 0..3 {
        let csv = std::fs::read_to_string(dir.path().join(format!("roc/fold{f}.csv"))).unwrap();
        assert!(csv.starts_with("fpr,tpr,threshold"));
    }
}

#[test]
fn sequential_jobs_match_default() {
    let dir = tempfile::tempdir().unwrap();
    let a = quick_fit(&dir, &[]);
    let first = std::fs::read_to_string(&a).unwrap();
    let b = path(&dir, "seq.json");
    ok(&[
        "--jobs", "1", "fit", "--data", &titanic(), "--label-col", "survived", "--lambda", "3", "--eta", "1",
        "--seed", "7", "--iters", "2000", "--max-iters", "2000", "--output", &b,
    ]);
    let strip = |s: &str| {
        s.lines()
            .filter(|l| !l.contains("\"created_at\"") && !l.contains("\"output\""))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(strip(&first), strip(&std::fs::read_to_string(&b).unwrap()));
}
