use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn myoimp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_myoimp"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = myoimp(args);
    assert!(
        out.status.success(),
        "{args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn small_config(dir: &Path) -> String {
    let cfg = json!({
        "subject": {
            "gain_seconds": 5.0,
            "body_map": {"levels": [0.0, 0.1, 0.2, 0.4, 0.6, 0.8, 1.0], "settle": 1.0}
        },
        "dataset": {"trials": 3, "duration": 4.0},
        "optimization": {"sa": {"iterations": 3, "max_evals": 6}},
        "baseline": {"epochs": 50},
        "protocol": {"timeout": 3.0, "hold": 1.0},
        "batch": {"trials": 1, "seed": 4}
    });
    let path = dir.join("config.json");
    std::fs::write(&path, cfg.to_string()).unwrap();
    path.to_str().unwrap().to_string()
}

fn csv_rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(|r| r.unwrap()).collect()
}

#[test]
fn default_config_parses_back() {
    let text = ok(&["config"]);
    let v: Value = serde_json::from_str(&text).unwrap();
    for block in ["geometry", "pipeline", "emg", "optimization", "protocol", "service", "batch"] {
        assert!(v.get(block).is_some(), "{block}");
    }
    assert_eq!(v["optimization"]["sa"]["max_evals"], 5000);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    std::fs::write(&path, &text).unwrap();
    assert_eq!(ok(&["config", "--config", path.to_str().unwrap()]), text);
}

#[test]
fn bad_input_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.json");
    let out = myoimp(&["config", "--config", missing.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.json"));

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"protocol": {"hold": "long"}}"#).unwrap();
    assert!(!myoimp(&["config", "--config", bad.to_str().unwrap()]).status.success());

    let out = myoimp(&["train", "--data", dir.path().to_str().unwrap(), "--out", "p.json"]);
    assert!(!out.status.success());
}

#[test]
fn offline_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = small_config(d);
    let p = |name: &str| d.join(name).to_str().unwrap().to_string();

    ok(&["synth", "--config", &cfg, "--out", &p("data"), "--seed", "2"]);
    assert!(d.join("data/dataset.json").exists());
    let subject: Value = serde_json::from_str(&std::fs::read_to_string(d.join("data/subject.json")).unwrap()).unwrap();
    assert_eq!(subject["norm_max"].as_array().unwrap().len(), 8);

    ok(&["train", "--config", &cfg, "--data", &p("data"), "--out", &p("params.json")]);
    let params: Value = serde_json::from_str(&std::fs::read_to_string(d.join("params.json")).unwrap()).unwrap();
    assert!(params["extensor"]["F_max"].is_number());
    assert!(params["validation_rmse"].as_f64().unwrap().is_finite());
    assert!(!csv_rows(&d.join("params_history.csv")).is_empty());
    assert!(!csv_rows(&d.join("params_validation.csv")).is_empty());

    let text = ok(&["evaluate", "--config", &cfg, "--data", &p("data"), "--params", &p("params.json"), "--out", &p("eval.csv")]);
    assert!(text.contains("RMSE"));
    let header = csv::Reader::from_path(d.join("eval.csv")).unwrap().headers().unwrap().clone();
    assert_eq!(header.iter().collect::<Vec<_>>(), ["trial", "t", "q_gt", "q_r", "q_f"]);

    ok(&["train-baseline", "--config", &cfg, "--data", &p("data"), "--out", &p("baseline.json")]);
    ok(&["eval-baseline", "--config", &cfg, "--data", &p("data"), "--model", &p("baseline.json"), "--out", &p("beval.csv")]);
    assert!(!csv_rows(&d.join("beval.csv")).is_empty());

    let out = myoimp(&["simulate", "--config", &cfg, "--out", &p("batch")]);
    assert!(!out.status.success(), "baseline conditions need a model");

    ok(&["simulate", "--config", &cfg, "--baseline", &p("baseline.json"), "--out", &p("batch")]);
    assert_eq!(csv_rows(&d.join("batch/trials.csv")).len(), 4);
    assert_eq!(csv_rows(&d.join("batch/groups.csv")).len(), 4);
    let groups = std::fs::read(d.join("batch/groups.csv")).unwrap();

    ok(&["metrics", "--batch", &p("batch"), "--out", &p("metrics")]);
    assert_eq!(std::fs::read(d.join("metrics/groups.csv")).unwrap(), groups);
    let mi = csv::Reader::from_path(d.join("metrics/mi_tr.csv")).unwrap().headers().unwrap().clone();
    assert!(mi.iter().any(|h| h == "mi") && mi.iter().any(|h| h == "tr"));
}
