use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn nuecls(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nuecls"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = nuecls(args);
    assert!(
        out.status.success(),
        "nuecls {} failed: {}",
        args.join(" "),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

fn p(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_str().unwrap().to_string()
}

/// Small dataset shared by the model-running tests.
fn small_dataset(dir: &TempDir, n: usize) -> String {
    let out = p(dir, "data");
    ok(&["generate", "--n-events", &n.to_string(), "--seed", "3", "--out", &out]);
    out
}

const FAST: [&str; 8] = ["--trees", "10", "--folds", "2", "--repeats", "2", "--seed", "5"];

#[test]
fn generate_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (p(&dir, "a"), p(&dir, "b"));
    let stdout = ok(&["generate", "--n-events", "100", "--seed", "7", "--out", &a]);
    ok(&["generate", "--n-events", "100", "--seed", "7", "--out", &b]);
    assert!(stdout.contains("100 events"), "{stdout}");
    for f in ["manifest.json", "events.jsonl"] {
        assert_eq!(fs::read(Path::new(&a).join(f)).unwrap(), fs::read(Path::new(&b).join(f)).unwrap(), "{f}");
    }
}

#[test]
fn generate_defaults_to_full_dataset_size() {
    let dir = TempDir::new().unwrap();
    let out = p(&dir, "full");
    ok(&["generate", "--out", &out]);
    let m = json(&Path::new(&out).join("manifest.json"));
    assert_eq!(m["n_events"], 7090);
    assert_eq!(fs::read_to_string(Path::new(&out).join("events.jsonl")).unwrap().lines().count(), 7090);
}

#[test]
fn extract_column_counts() {
    let dir = TempDir::new().unwrap();
    let data = small_dataset(&dir, 12);
    let a = p(&dir, "a");
    ok(&["extract", "--dataset", &data, "--bins", "36", "--stats", "on", "--out", &a]);
    let (header, rows) = csv_rows(&Path::new(&a).join("features.csv"));
    assert_eq!(header.len(), 85);
    assert_eq!(&header[..3], ["id", "label", "energy_gev"]);
    assert_eq!(rows.len(), 12);
    assert!(rows.iter().all(|r| r.len() == 85));

    let b = p(&dir, "b");
    ok(&["extract", "--dataset", &data, "--bins", "18", "--stats", "off", "--out", &b]);
    let (header, _) = csv_rows(&Path::new(&b).join("features.csv"));
    assert_eq!(header.len(), 39);
}

#[test]
fn extract_of_empty_dataset_writes_header_only() {
    let dir = TempDir::new().unwrap();
    let data = small_dataset(&dir, 0);
    let out = p(&dir, "x");
    ok(&["extract", "--dataset", &data, "--out", &out]);
    let text = fs::read_to_string(Path::new(&out).join("features.csv")).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert_eq!(text.lines().next().unwrap().split(',').count(), 85);
}

#[test]
fn extract_lists_invalid_event_ids() {
    let dir = TempDir::new().unwrap();
    let data = small_dataset(&dir, 4);
    let events = Path::new(&data).join("events.jsonl");
    let text = fs::read_to_string(&events).unwrap();
    let broken: Vec<String> = text
        .lines()
        .enumerate()
        .map(|(i, l)| if i == 1 || i == 3 { l.replacen("\"piv\":[50,50]", "\"piv\":[500,50]", 1) } else { l.to_string() })
        .collect();
    fs::write(&events, broken.join("\n") + "\n").unwrap();
    let out = nuecls(&["extract", "--dataset", &data, "--out", &p(&dir, "x")]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("2 invalid events"), "{err}");
    assert!(err.contains("evt000001") && err.contains("evt000003"), "{err}");
    assert!(!err.contains("evt000002"), "{err}");
}

#[test]
fn cv_with_single_repetition_notes_missing_std() {
    let dir = TempDir::new().unwrap();
    let out = p(&dir, "cv");
    let stdout = ok(&["cv", "--n-events", "20", "--repeats", "1", "--folds", "2", "--trees", "10", "--out", &out]);
    assert!(stdout.starts_with("AUC "), "{stdout}");
    assert!(stdout.contains("std undefined"), "{stdout}");
    let r = json(&Path::new(&out).join("report.json"));
    assert_eq!(r["dataset"]["n_events"], 20);
    assert!(r["auc"]["std"].is_null());
    assert_eq!(r["auc"]["values"].as_array().unwrap().len(), 1);
    let (header, rows) = csv_rows(&Path::new(&out).join("roc.csv"));
    assert_eq!(header, ["fpr", "tpr", "threshold"]);
    assert_eq!(rows[0], ["0", "0", "inf"]);
    assert!(Path::new(&out).join("roc.svg").exists());
}

#[test]
fn every_run_writes_resolved_config() {
    let dir = TempDir::new().unwrap();
    let data = small_dataset(&dir, 10);
    let cfg = json(&Path::new(&data).join("resolved_config.json"));
    assert_eq!(cfg["command"], "generate");
    assert_eq!(cfg["seed"], 3);
    assert_eq!(cfg["seeds"]["generator"], 3);
    assert_eq!(cfg["generator"]["n_events"], 10);

    let out = p(&dir, "x");
    ok(&["extract", "--dataset", &data, "--radius", "5", "--out", &out]);
    let cfg = json(&Path::new(&out).join("resolved_config.json"));
    assert_eq!(cfg["command"], "extract");
    assert_eq!(cfg["descriptor"]["radius"], 5.0);
    assert_eq!(cfg["dataset"], data.as_str());
}

#[test]
fn flags_override_config_file_which_overrides_quick() {
    let dir = TempDir::new().unwrap();
    let file = p(&dir, "cfg.json");
    fs::write(&file, r#"{"forest": {"n_trees": 7}, "cv": {"repeats": 4}, "seed": 11}"#).unwrap();
    let data = small_dataset(&dir, 20);
    let out = p(&dir, "x");
    ok(&["cv", "--quick", "--config", &file, "--dataset", &data, "--repeats", "1", "--folds", "2", "--out", &out]);
    let cfg = json(&Path::new(&out).join("resolved_config.json"));
    assert_eq!(cfg["forest"]["n_trees"], 7);
    assert_eq!(cfg["cv"]["repeats"], 1);
    assert_eq!(cfg["cv"]["folds"], 2);
    assert_eq!(cfg["seed"], 11);
    assert_eq!(cfg["quick"], true);
    // --quick's event count survives because the file does not set it.
    assert_eq!(cfg["generator"]["n_events"], 700);
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let bad_key = p(&dir, "bad.json");
    fs::write(&bad_key, r#"{"forest": {"trees": 7}}"#).unwrap();
    let cases: Vec<Vec<String>> = vec![
        vec!["cv".into(), "--no-such-flag".into()],
        vec!["energy-eval".into(), "--edges".into(), "0.2,0.2".into(), "--out".into(), p(&dir, "e")],
        vec!["generate".into(), "--out".into(), "/proc/nope/data".into()],
        vec!["cv".into(), "--config".into(), bad_key, "--out".into(), p(&dir, "c")],
        vec!["cv".into(), "--config".into(), p(&dir, "missing.json"), "--out".into(), p(&dir, "c")],
        vec!["cv".into(), "--folds".into(), "1".into(), "--out".into(), p(&dir, "c")],
    ];
    for args in cases {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let out = nuecls(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!out.stderr.is_empty(), "{args:?}");
    }
}

#[test]
fn missing_dataset_is_a_propagated_error() {
    let dir = TempDir::new().unwrap();
    let out = nuecls(&["extract", "--dataset", &p(&dir, "nothing"), "--out", &p(&dir, "x")]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

fn cv_auc(dir: &TempDir, data: &str) -> Value {
    let out = p(dir, "cv");
    let mut args = vec!["cv", "--dataset", data, "--out", &out];
    args.extend(FAST);
    ok(&args);
    json(&Path::new(&out).join("report.json"))
}

#[test]
fn single_cell_sweep_matches_cv() {
    let dir = TempDir::new().unwrap();
    let data = small_dataset(&dir, 60);
    let report = cv_auc(&dir, &data);
    let out = p(&dir, "sweep");
    let mut args = vec![
        "sweep", "--dataset", &data, "--bins-grid", "36", "--radius-grid", "10", "--stats-grid", "on", "--out", &out,
    ];
    args.extend(FAST);
    let stdout = ok(&args);
    assert!(stdout.contains("best: bins=36 radius=10 stats=on"), "{stdout}");
    let (header, rows) = csv_rows(&Path::new(&out).join("sweep.csv"));
    assert_eq!(header, ["bins", "radius", "stats", "auc_mean", "auc_std", "acc_mean", "acc_std"]);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][3].parse::<f64>().unwrap(), report["auc"]["mean"].as_f64().unwrap());
    assert_eq!(rows[0][5].parse::<f64>().unwrap(), report["accuracy"]["mean"].as_f64().unwrap());
    assert!(Path::new(&out).join("sweep.svg").exists());
}

#[test]
fn sweep_skip_existing_resumes() {
    let dir = TempDir::new().unwrap();
    let data = small_dataset(&dir, 40);
    let out = p(&dir, "sweep");
    let base = ["sweep", "--dataset", &data, "--stats-grid", "on", "--radius-grid", "10", "--out", &out];
    let mut first = base.to_vec();
    first.extend(["--bins-grid", "18"]);
    first.extend(FAST);
    ok(&first);
    let before = fs::read_to_string(Path::new(&out).join("sweep.csv")).unwrap();

    let mut second = base.to_vec();
    second.extend(["--bins-grid", "18,36", "--skip-existing"]);
    second.extend(FAST);
    let run = nuecls(&second);
    assert!(run.status.success());
    assert!(String::from_utf8_lossy(&run.stderr).contains("skipping B=18"));
    let after = fs::read_to_string(Path::new(&out).join("sweep.csv")).unwrap();
    assert!(after.starts_with(&before));
    assert_eq!(after.lines().count(), 3);
}

#[test]
fn tree_sweep_dedups_counts_and_accepts_one_tree() {
    let dir = TempDir::new().unwrap();
    let data = small_dataset(&dir, 40);
    let out = p(&dir, "trees");
    let mut args = vec!["tree-sweep", "--dataset", &data, "--counts", "5,1,5", "--out", &out];
    args.extend(FAST);
    let run = nuecls(&args);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(String::from_utf8_lossy(&run.stderr).to_lowercase().contains("duplicate"));
    let (header, rows) = csv_rows(&Path::new(&out).join("trees.csv"));
    assert_eq!(header[0], "n_trees");
    let counts: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(counts, ["1", "5"]);
    assert!(Path::new(&out).join("trees.svg").exists());
}

#[test]
fn noise_level_zero_matches_cv() {
    let dir = TempDir::new().unwrap();
    let data = small_dataset(&dir, 60);
    let report = cv_auc(&dir, &data);
    let out = p(&dir, "noise");
    let mut args = vec!["noise-sweep", "--dataset", &data, "--levels", "0,2", "--out", &out];
    args.extend(FAST);
    ok(&args);
    let level0 = json(&Path::new(&out).join("noise_level_0.json"));
    assert_eq!(level0["auc"], report["auc"]);
    assert_eq!(level0["accuracy"], report["accuracy"]);
    assert_eq!(level0["piv_noise_level"], 0);
    let (_, rows) = csv_rows(&Path::new(&out).join("noise.csv"));
    assert_eq!(rows.len(), 2);
    assert!(Path::new(&out).join("noise_roc.svg").exists());
}

#[test]
fn single_energy_bin_matches_global() {
    let dir = TempDir::new().unwrap();
    let data = small_dataset(&dir, 60);
    let out = p(&dir, "energy");
    let mut args = vec!["energy-eval", "--dataset", &data, "--edges", "0.2,1.0", "--out", &out];
    args.extend(FAST);
    ok(&args);
    let r = json(&Path::new(&out).join("energy_report.json"));
    assert_eq!(r["mode"], "slice");
    let bins = r["bins"].as_array().unwrap();
    assert_eq!(bins.len(), 1);
    assert_eq!(bins[0]["n_samples"], 60);
    let global = &r["global"];
    assert_eq!(bins[0]["auc"]["mean"], global["auc"]["mean"]);
    let (_, rows) = csv_rows(&Path::new(&out).join("energy.csv"));
    assert_eq!(rows.len(), 1);
}

#[test]
fn energy_bins_without_both_classes_are_absent() {
    let dir = TempDir::new().unwrap();
    let data = small_dataset(&dir, 40);
    let out = p(&dir, "energy");
    let mut args = vec!["energy-eval", "--dataset", &data, "--edges", "0.2,0.201,1.0", "--out", &out];
    args.extend(FAST);
    let stdout = ok(&args);
    assert!(stdout.contains("absent"), "{stdout}");
    let r = json(&Path::new(&out).join("energy_report.json"));
    assert!(r["bins"][0]["auc"].is_null());
    assert!(!r["bins"][1]["auc"].is_null());
}
