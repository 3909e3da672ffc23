use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use semiord::bench::TrialLine;
use semiord::data::Synthetic;

fn toy_csv(dir: &Path) -> PathBuf {
    let path = dir.join("toy.csv");
    let table = Synthetic {
        label_noise: 0.1,
        ..Synthetic::new(150, 3, 4, 3)
    }
    .generate()
    .unwrap();
    table.write_csv(std::fs::File::create(&path).unwrap()).unwrap();
    path
}

fn semiord(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_semiord")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn train_prints_json_and_saves_model() {
    let dir = tempfile::tempdir().unwrap();
    let csv = toy_csv(dir.path());
    let model = dir.path().join("m.txt");
    let log = dir.path().join("log.csv");
    let out = semiord(&[
        "train", "--data", s(&csv), "--method", "semi2-linear", "--surrogate", "at", "--seed", "7",
        "--max-epochs", "200", "--out", s(&model), "--log", s(&log),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    for field in ["dataset", "method", "metric", "value", "seed"] {
        assert!(v.get(field).is_some(), "missing {field}: {v}");
    }
    assert_eq!(v["dataset"], "toy");
    assert_eq!(v["method"], "semi2-linear");
    assert_eq!(v["metric"], "MAE");
    assert_eq!(v["seed"], 7);
    assert!(v["value"].as_f64().unwrap() >= 0.0);

    let text = std::fs::read_to_string(&log).unwrap();
    assert_eq!(text.lines().next(), Some("epoch,objective,val_risk"));

    let eval = semiord(&["eval", "--data", s(&csv), "--model-file", s(&model), "--seed", "7"]);
    assert!(eval.status.success(), "{}", String::from_utf8_lossy(&eval.stderr));
    let e: serde_json::Value = serde_json::from_slice(&eval.stdout).unwrap();
    assert_eq!(e["value"], v["value"]);
}

#[test]
fn missing_file_names_path() {
    let out = semiord(&["train", "--data", "/no/such/dir/data.csv"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("/no/such/dir/data.csv"), "{err}");
    assert_eq!(err.trim().lines().count(), 1);
}

#[test]
fn gamma_out_of_range_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let csv = toy_csv(dir.path());
    let out = semiord(&["train", "--data", s(&csv), "--gamma", "1.5"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("[0, 1]"), "{err}");
}

#[test]
fn variance_prints_one_row_per_surrogate() {
    let dir = tempfile::tempdir().unwrap();
    let csv = toy_csv(dir.path());
    let args = ["variance", "--data", s(&csv), "--surrogate", "at,it,ls", "--resamples", "200", "--seed", "2"];
    let a = semiord(&args);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    let text = String::from_utf8(a.stdout.clone()).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0][0], "AT");
    assert_eq!(rows[0][1], "toy");
    assert!(rows.iter().all(|r| r[2].parse::<f64>().unwrap() > 0.0));
    assert_eq!(semiord(&args).stdout, a.stdout);
}

#[test]
fn bench_writes_lines_summary_and_stats() {
    let dir = tempfile::tempdir().unwrap();
    let csv = toy_csv(dir.path());
    let out = dir.path().join("run.jsonl");
    let res = semiord(&[
        "bench", "--data", s(&csv), "--methods", "sv,semi1,semi2", "--surrogate", "it", "--trials", "2",
        "--max-epochs", "100", "--seed", "5", "--out", s(&out),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let lines: Vec<TrialLine> = std::fs::read_to_string(&out)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 6);
    for l in &lines {
        match l {
            TrialLine::Ok(r) => assert_eq!(r.metric, "MZE"),
            TrialLine::Failed(f) => panic!("trial failed: {}", f.error),
        }
    }
    let summary = std::fs::read_to_string(dir.path().join("run.summary.csv")).unwrap();
    assert_eq!(
        summary.lines().next(),
        Some("dataset,method,surrogate,metric,mean,stderr,n_trials")
    );
    assert_eq!(summary.lines().count(), 4);
    let stats = std::fs::read_to_string(dir.path().join("run.stats.csv")).unwrap();
    assert!(stats.starts_with("dataset,method,surrogate,metric,n_failed,t_vs_sv"));
}

#[test]
fn bad_method_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let csv = toy_csv(dir.path());
    let out = semiord(&["bench", "--data", s(&csv), "--methods", "semi9"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("semi9"));
}
