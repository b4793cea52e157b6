use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn gtda(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gtda")).args(args).output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, extra: &[&str]) {
    let mut args = vec!["synth", "--out-dir", path(dir), "--n-per-class", "20", "--shift", "0.7"];
    args.extend_from_slice(extra);
    let out = gtda(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

struct Run {
    soft: PathBuf,
    hard: PathBuf,
    report: Value,
}

fn run(dir: &Path, tag: &str, extra: &[&str]) -> Run {
    let soft = dir.join(format!("{tag}-soft.csv"));
    let hard = dir.join(format!("{tag}-hard.csv"));
    let (s, sl, t) = (dir.join("source.csv"), dir.join("source_labels.csv"), dir.join("target.csv"));
    let mut args = vec![
        "run",
        "--source",
        path(&s),
        "--source-labels",
        path(&sl),
        "--target",
        path(&t),
        "--out-soft",
        path(&soft),
        "--out-hard",
        path(&hard),
    ];
    args.extend_from_slice(extra);
    let out = gtda(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = serde_json::from_slice(&out.stdout).unwrap();
    Run { soft, hard, report }
}

fn read_rows(p: &Path) -> Vec<Vec<f64>> {
    std::fs::read_to_string(p)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(|v| v.trim().parse().unwrap()).collect())
        .collect()
}

#[test]
fn synth_writes_four_files() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), &["--classes", "4", "--dim", "6"]);
    let source = read_rows(&dir.path().join("source.csv"));
    assert_eq!(source.len(), 80);
    assert!(source.iter().all(|r| r.len() == 6));
    let labels = read_rows(&dir.path().join("target_labels.csv"));
    assert_eq!(labels.len(), 80);
    assert!(labels.iter().all(|r| (1.0..=4.0).contains(&r[0])));
}

#[test]
fn target_labels_do_not_change_predictions() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), &[]);
    let tl = dir.path().join("target_labels.csv");
    for method in ["gtg", "lp", "ls", "hf"] {
        let blind = run(dir.path(), &format!("{method}-blind"), &["--method", method, "--prior", "lr"]);
        let scored = run(dir.path(), &format!("{method}-scored"), &["--method", method, "--prior", "lr", "--target-labels", path(&tl)]);
        assert_eq!(std::fs::read(&blind.soft).unwrap(), std::fs::read(&scored.soft).unwrap(), "{method}");
        assert_eq!(std::fs::read(&blind.hard).unwrap(), std::fs::read(&scored.hard).unwrap(), "{method}");
        assert!(blind.report.get("accuracy").is_none());
        assert!(blind.report.get("per_class_accuracy").is_none());
        let acc = scored.report["accuracy"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&acc));
    }
}

#[test]
fn soft_rows_are_distributions_and_hard_is_argmax() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), &[]);
    for method in ["gtg", "lp", "ls", "hf"] {
        let r = run(dir.path(), method, &["--method", method]);
        let soft = read_rows(&r.soft);
        let hard = read_rows(&r.hard);
        assert_eq!(soft.len(), 60);
        assert_eq!(hard.len(), 60);
        for (s, h) in soft.iter().zip(&hard) {
            assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-9, "{method}: {s:?}");
            assert!(s.iter().all(|&v| v >= 0.0));
            let best = s.iter().enumerate().fold(0, |b, (i, &v)| if v > s[b] { i } else { b });
            assert_eq!(h[0] as usize, best + 1, "{method}");
        }
    }
}

#[test]
fn report_records_iterations_for_iterative_methods() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), &[]);
    let gtg = run(dir.path(), "gtg", &[]);
    assert!(gtg.report["iterations"].as_u64().unwrap() >= 1);
    assert_eq!(gtg.report["converged"], Value::Bool(true));
    let hf = run(dir.path(), "hf", &["--method", "hf"]);
    assert!(hf.report["iterations"].is_null());
}

#[test]
fn dumps_graph_and_model() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), &[]);
    let graph = dir.path().join("graph.txt");
    let model = dir.path().join("model.json");
    run(dir.path(), "dump", &["--prior", "lr", "--dump-graph", path(&graph), "--dump-model", path(&model)]);
    let lines = std::fs::read_to_string(&graph).unwrap();
    let first: Vec<&str> = lines.lines().next().unwrap().split_whitespace().collect();
    assert_eq!(first.len(), 3);
    let model: Value = serde_json::from_str(&std::fs::read_to_string(&model).unwrap()).unwrap();
    assert_eq!(model["classes"], 3);
    assert!(model["selected_C"].as_f64().unwrap() > 0.0);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(gtda(&["run"]).status.code(), Some(1));
    assert_eq!(gtda(&["frobnicate"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), &[]);
    let s = dir.path().join("source.csv");
    let out = gtda(&["run", "--source", path(&s), "--source-labels", path(&s), "--target", path(&s), "--method", "svm"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(gtda(&["--help"]).status.code(), Some(0));
}

#[test]
fn bad_config_values_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), &[]);
    let (s, sl) = (dir.path().join("source.csv"), dir.path().join("source_labels.csv"));
    let out = gtda(&["run", "--source", path(&s), "--source-labels", path(&sl), "--target", path(&s), "--eps", "-1"]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn data_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), &[]);
    let (s, sl) = (dir.path().join("source.csv"), dir.path().join("source_labels.csv"));
    let missing = dir.path().join("nope.csv");
    let out = gtda(&["run", "--source", path(&missing), "--source-labels", path(&sl), "--target", path(&s)]);
    assert_eq!(out.status.code(), Some(2));

    let ragged = dir.path().join("ragged.csv");
    std::fs::write(&ragged, "1,2,3\n4,5\n").unwrap();
    let out = gtda(&["run", "--source", path(&ragged), "--source-labels", path(&sl), "--target", path(&s)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains('2'));

    // label count disagrees with the source rows
    let short = dir.path().join("short.csv");
    std::fs::write(&short, "1\n2\n").unwrap();
    let out = gtda(&["run", "--source", path(&s), "--source-labels", path(&short), "--target", path(&s)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn table_subcommand_renders_and_writes_json() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    synth(&a, &["--seed", "1"]);
    synth(&b, &["--seed", "2"]);
    let task = |name: &str, d: &str| {
        serde_json::json!({
            "name": name,
            "source": format!("{d}/source.csv"),
            "source_labels": format!("{d}/source_labels.csv"),
            "target": format!("{d}/target.csv"),
            "target_labels": format!("{d}/target_labels.csv"),
        })
    };
    let cfg = serde_json::json!({
        "methods": [
            {"name": "GTDA", "method": "gtg"},
            {"name": "LP", "method": "lp"},
        ],
        "tasks": [task("A", "a"), task("B", "b"), task("C", "missing")],
    });
    let cfg_path = dir.path().join("table.json");
    std::fs::write(&cfg_path, cfg.to_string()).unwrap();
    let json_path = dir.path().join("out.json");
    let out = gtda(&["table", "--config", path(&cfg_path), "--json", path(&json_path)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("GTDA") && text.contains("LP") && text.contains("avg"), "{text}");
    let table: Value = serde_json::from_str(&std::fs::read_to_string(&json_path).unwrap()).unwrap();
    assert_eq!(table["tasks"], serde_json::json!(["A", "B"]));
    assert_eq!(table["skipped"], serde_json::json!(["C"]));
    assert_eq!(table["rows"].as_array().unwrap().len(), 2);
}
