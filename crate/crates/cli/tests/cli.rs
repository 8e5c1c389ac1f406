use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::json;

fn featfuse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_featfuse")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn write_config(dir: &Path, csv: &Path, top_k: usize) -> String {
    let cfg = json!({
        "dataset": {"kind": "csv", "path": csv, "schema": "sensor"},
        "seed": 1,
        "models": ["decision_tree", {"family": "random_forest", "overrides": {"n_estimators": 8}}, "knn"],
        "independent": ["logistic_regression"],
        "explainer": {"background_size": 6, "shap_instances": 6, "lime_instances": 8,
                      "lime_samples_per_instance": 150, "permutation_rounds": 2, "permutation_rows": 100},
        "fusion": {"top_k": top_k}
    });
    let path = dir.join(format!("config_{top_k}.json"));
    fs::write(&path, cfg.to_string()).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn generate_run_and_report_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sensor.csv");
    let out = featfuse(&["generate", "--n", "300", "--seed", "4", "--out", csv.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let cfg = write_config(dir.path(), &csv, 5);

    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for target in [&a, &b] {
        let out = featfuse(&["run", "--config", &cfg, "--out", target.to_str().unwrap()]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        assert!(stdout(&out).contains("leveled top-5"));
    }
    for file in ["ranks_shap.csv", "ranks_lime.csv", "ranks_permutation.csv", "fused_leveled.csv", "summary.json"] {
        assert_eq!(fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap(), "{file}");
    }

    let seeded = dir.path().join("c");
    assert_eq!(code(&featfuse(&["run", "--config", &cfg, "--seed", "2", "--out", seeded.to_str().unwrap()])), 0);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(seeded.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["seed"], 2);

    let md = dir.path().join("again.md");
    let out = featfuse(&["report", "--summary", a.join("summary.json").to_str().unwrap(), "--out", md.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert_eq!(fs::read_to_string(md).unwrap(), fs::read_to_string(a.join("summary.md")).unwrap());
}

#[test]
fn exit_codes_follow_the_failing_stage() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sensor.csv");
    assert_eq!(code(&featfuse(&["generate", "--n", "100", "--out", csv.to_str().unwrap()])), 0);

    assert_eq!(code(&featfuse(&["run", "--config", &write_config(dir.path(), &csv, 11)])), 2);
    assert_eq!(code(&featfuse(&["run", "--config", "/nonexistent/config.json"])), 2);
    let bad_json = dir.path().join("bad.json");
    fs::write(&bad_json, "{ not json").unwrap();
    assert_eq!(code(&featfuse(&["run", "--config", bad_json.to_str().unwrap()])), 2);

    let missing = dir.path().join("missing.csv");
    let out = featfuse(&["run", "--config", &write_config(dir.path(), &missing, 3)]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("[data]"));

    assert_eq!(code(&featfuse(&["fuse", "--setup", "veremi_binary", "--k", "9"])), 2);
    assert_eq!(code(&featfuse(&["fuse"])), 2);
    assert_eq!(code(&featfuse(&["generate", "--n", "10", "--anomaly-fraction", "1.5", "--out", "x.csv"])), 2);
}

#[test]
fn fuse_fixtures_and_user_tables_agree() {
    let dir = tempfile::tempdir().unwrap();
    let fixtures = dir.path().join("fixtures");
    let out = featfuse(&["conformance", "--export-fixtures", fixtures.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    assert!(dir.path().join("conformance.json").exists());
    assert!(dir.path().join("conformance.md").exists());

    let from_setup = featfuse(&["fuse", "--setup", "veremi_binary"]);
    assert_eq!(code(&from_setup), 0);
    let text = stdout(&from_setup);
    let leveled = text.lines().find(|l| l.trim_start().starts_with("Leveled")).unwrap();
    for f in ["pos_x", "pos_y", "spd_x", "spd_y"] {
        assert!(leveled.contains(f), "{leveled}");
    }

    let tables: Vec<String> = ["shap", "lime", "dalex"]
        .iter()
        .map(|m| format!("{m}={}", fixtures.join(format!("veremi_binary_{m}.csv")).display()))
        .collect();
    let fused_dir = dir.path().join("fused");
    let mut args = vec!["fuse", "--k", "4", "--out", fused_dir.to_str().unwrap()];
    for t in &tables {
        args.extend(["--table", t.as_str()]);
    }
    let from_files = featfuse(&args);
    assert_eq!(code(&from_files), 0, "{}", String::from_utf8_lossy(&from_files.stderr));
    assert_eq!(stdout(&from_files), text);
    assert!(fused_dir.join("fused_leveled.csv").exists());

    let mean = featfuse(&["fuse", "--setup", "veremi_binary", "--mode", "mean-rank"]);
    assert_eq!(code(&mean), 0);
}

#[test]
fn fixture_run_config_passes_conformance() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("fixtures.json");
    fs::write(&cfg, r#"{"dataset": {"kind": "fixtures", "setup": "veremi_multiclass"}, "seed": 0}"#).unwrap();
    let out = featfuse(&["run", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("conformance: pass"));
}
