use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const SMALL: &str = r#"{
    "data": {"kind": "fixture", "spec": {"positives": 60, "negatives": 3000}},
    "classifiers": [{"family": "gaussian_nb"}],
    "ga": {"population_size": 10, "iterations": 3}
}"#;

fn mixbalance(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mixbalance"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stage(dir: &Path, cmd: &str, extra: &[&str]) -> Output {
    let mut args = vec![cmd, "--config", "cfg.json", "--out", "out"];
    args.extend_from_slice(extra);
    mixbalance(&args, dir)
}

fn workspace(config: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("cfg.json"), config).unwrap();
    dir
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn configuration_problems_exit_with_1() {
    let dir = workspace(r#"{"sead": 3}"#);
    let o = stage(dir.path(), "prepare", &[]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stderr(&o).contains("sead"));

    let o = mixbalance(&["prepare", "--config", "missing.json"], dir.path());
    assert_eq!(o.status.code(), Some(1));

    let o = mixbalance(&["prepare", "--bogus"], dir.path());
    assert_eq!(o.status.code(), Some(1));

    let o = mixbalance(&["report", "--seed", "not-a-number"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn help_exits_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let o = mixbalance(&["--help"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    for cmd in ["prepare", "generate", "search", "evaluate", "report"] {
        assert!(text.contains(cmd), "{cmd} missing from help");
    }
}

#[test]
fn stage_without_its_inputs_exits_with_2() {
    let dir = workspace(SMALL);
    let o = stage(dir.path(), "generate", &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("run `prepare` first"), "{}", stderr(&o));
}

#[test]
fn unknown_classifier_filter_is_a_config_error() {
    let dir = workspace(SMALL);
    assert!(stage(dir.path(), "prepare", &[]).status.success());
    assert!(stage(dir.path(), "generate", &[]).status.success());
    let o = stage(dir.path(), "evaluate", &["--ratio", "1:1:1", "--classifier", "svm"]);
    assert_eq!(o.status.code(), Some(1));
    let o = stage(dir.path(), "evaluate", &["--ratio", "1:x:1"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn staged_run_matches_full_report() {
    let dir = workspace(SMALL);
    let out = dir.path().join("out");
    for cmd in ["prepare", "generate", "search", "evaluate"] {
        let o = stage(dir.path(), cmd, &[]);
        assert!(o.status.success(), "{cmd}: {}", stderr(&o));
    }
    for file in [
        "train.csv",
        "test.csv",
        "normalizer.json",
        "pool_1.csv",
        "pool_2.csv",
        "pool_3.csv",
        "pool_quality.json",
    ] {
        assert!(out.join(file).exists(), "{file}");
    }
    let ga = json(&out.join("ga_gaussian_nb.json"));
    let evaluation = json(&out.join("evaluation.json"));
    assert_eq!(evaluation[0]["classifier"], "gaussian_nb");
    let staged_gmean = evaluation[0]["metrics"]["g_mean"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&staged_gmean));

    let o = stage(dir.path(), "report", &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("gaussian_nb"));
    let report = json(&out.join("report.json"));
    let run = &report["body"]["runs"][0]["classifiers"][0];
    assert_eq!(run["ga"]["best_ratio"], ga["best_ratio"]);
    let variants = run["variants"].as_array().unwrap();
    let ga_variant = variants.iter().find(|v| v["variant"] == "ga_optimized").unwrap();
    assert_eq!(ga_variant["metrics"]["g_mean"].as_f64().unwrap(), staged_gmean);
    let csv = fs::read_to_string(out.join("report.csv")).unwrap();
    assert!(csv.starts_with("classifier,imbalanced,pool_1,pool_2,pool_3,ga_optimized"));
    assert!(fs::read_to_string(out.join("report.md"))
        .unwrap()
        .contains("GA-optimized"));
}

#[test]
fn explicit_ratio_and_seed_override() {
    let dir = workspace(SMALL);
    let out = dir.path().join("out");
    assert!(stage(dir.path(), "prepare", &[]).status.success());
    let first = fs::read_to_string(out.join("train.csv")).unwrap();
    assert!(stage(dir.path(), "prepare", &["--seed", "5"]).status.success());
    let reseeded = fs::read_to_string(out.join("train.csv")).unwrap();
    assert_ne!(first, reseeded);

    assert!(stage(dir.path(), "generate", &["--seed", "5"]).status.success());
    let o = stage(dir.path(), "evaluate", &["--seed", "5", "--ratio", "6:0:1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let evaluation = json(&out.join("evaluation.json"));
    let counts = evaluation[0]["assembly"]["counts"].as_array().unwrap();
    let counts: Vec<u64> = counts.iter().map(|c| c.as_u64().unwrap()).collect();
    assert_eq!(counts[1], 0);
    assert!(counts[0] > 5 * counts[2]);
    assert!(out.join("model_gaussian_nb.json").exists());
}

#[test]
fn failing_stage_writes_partial_report_and_exits_with_2() {
    let dir = workspace(
        r#"{
        "data": {"kind": "fixture", "spec": {"positives": 60, "negatives": 3000}},
        "classifiers": [{"family": "gaussian_nb"}, {"family": "svm", "max_iterations": 1}],
        "ga": {"population_size": 4, "iterations": 1}
    }"#,
    );
    let o = stage(dir.path(), "report", &[]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("svm/imbalanced"));
    let md = fs::read_to_string(dir.path().join("out/report.md")).unwrap();
    assert!(md.contains("PARTIAL"));
    let report = json(&dir.path().join("out/report.json"));
    assert_eq!(report["body"]["status"]["state"], "partial");
    assert_eq!(
        report["body"]["runs"][0]["classifiers"][0]["variants"]
            .as_array()
            .unwrap()
            .len(),
        5
    );
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            mixbalance::harness::ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            seen += 1;
        }
    }
    assert!(seen >= 2);
}
