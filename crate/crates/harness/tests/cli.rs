use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qrobust::report::REPORT_JSON_SCHEMA;
use qrobust_core::attacks;
use qrobust_core::qnn::CircuitSpec;
use tempfile::TempDir;

fn qrobust(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qrobust"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ok(args: &[&str]) -> Output {
    let o = qrobust(args);
    assert!(o.status.success(), "qrobust {args:?} failed:\n{}", stderr(&o));
    o
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("{}: {e}", path.display()))
        .lines()
        .map(str::to_string)
        .collect()
}

#[test]
fn reference_preset_run_has_25_history_rows_and_is_byte_stable() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().to_str().unwrap();
    let cfg = write_config(tmp.path(), "ref.toml", "model = \"hybrid-alex\"\npreset = \"reference\"\nseed = 4\n");
    let cfg = cfg.to_str().unwrap();
    ok(&["train", "--config", cfg, "--out", out, "--run-id", "r"]);
    let history = tmp.path().join("r/history.csv");
    let first = fs::read(&history).unwrap();
    let rows = lines(&history);
    assert_eq!(rows.len(), 26);
    assert_eq!(rows[0], "epoch,learning_rate,train_loss,train_accuracy,test_loss,test_accuracy");
    // Step schedule: step size 9 for this variant.
    assert!(rows[9].starts_with("9,0.00291,"), "{}", rows[9]);
    let lr10: f64 = rows[10].split(',').nth(1).unwrap().parse().unwrap();
    assert!((lr10 - 0.000291).abs() < 1e-15, "{}", rows[10]);

    ok(&["train", "--config", cfg, "--out", out, "--run-id", "r"]);
    assert_eq!(fs::read(&history).unwrap(), first);
}

#[test]
fn missing_dataset_file_exits_2_naming_the_path() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        "[dataset]\nkind = \"file\"\npath = \"/definitely/not/here.csv\"\n",
    );
    let o = qrobust(&["train", "--config", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/definitely/not/here.csv"), "{}", stderr(&o));
}

#[test]
fn usage_and_config_errors_exit_2() {
    assert_eq!(qrobust(&["train", "--model", "resnet"]).status.code(), Some(2));
    assert_eq!(qrobust(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(qrobust(&["attack", "--eps-start", "0.5", "--eps-end", "0.1"]).status.code(), Some(2));

    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "bad.toml", "[train]\nbatch_size = -3\n");
    let o = qrobust(&["train", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("train.batch_size"), "{}", stderr(&o));
    assert_eq!(qrobust(&["train", "--config", "/no/such/config.toml"]).status.code(), Some(2));
}

#[test]
fn attack_without_checkpoint_is_a_runtime_failure() {
    let tmp = TempDir::new().unwrap();
    let o = qrobust(&["attack", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("checkpoint.json"), "{}", stderr(&o));
}

#[test]
fn attack_sweeps_follow_the_grid_and_report_validates() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().to_str().unwrap();
    let common = ["--out", out, "--model", "classical-alex", "--seed", "2"];
    ok(&[&["train"], &common[..]].concat());
    ok(&[&["attack"], &common[..]].concat());
    let dir = tmp.path().join("classical-alex-seed2");

    let grid = attacks::default_epsilon_grid();
    let mut minima = Vec::new();
    for kind in ["ga", "fgsa", "pgd"] {
        let rows = lines(&dir.join(format!("sweep_{kind}.csv")));
        assert_eq!(rows[0], "epsilon,clean_acc,adv_acc,success_rate");
        assert_eq!(rows.len(), 11);
        let eps: Vec<f64> = rows[1..].iter().map(|r| r.split(',').next().unwrap().parse().unwrap()).collect();
        assert_eq!(eps, grid);
        let accs: Vec<f64> = rows[1..].iter().map(|r| r.split(',').nth(2).unwrap().parse().unwrap()).collect();
        minima.push(accs.iter().copied().fold(f64::INFINITY, f64::min));
    }
    assert!(minima[2] <= minima[1], "PGD min {} above FGSA min {}", minima[2], minima[1]);

    let summary = lines(&dir.join("summary.csv"));
    assert_eq!(summary[0], "attack,epsilon,min_adv_acc,clean_acc");
    assert_eq!(summary.len(), 4);
    // A flat GA curve reports the first grid point.
    let ga: Vec<&str> = summary[1].split(',').collect();
    let ga_rows = lines(&dir.join("sweep_ga.csv"));
    if ga_rows[1..].iter().all(|r| r.split(',').nth(2) == Some(ga[2])) {
        assert_eq!(ga[1], "0.05");
    }

    ok(&[&["report"], &common[..]].concat());
    let text = fs::read_to_string(dir.join("report.json")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&text).unwrap();
    let schema: serde_json::Value = serde_json::from_str(REPORT_JSON_SCHEMA).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator.iter_errors(&json).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}");
    assert_eq!(json["schema"], "qrobust.report/v1");
    assert_eq!(json["sweeps"].as_array().unwrap().len(), 3);

    // Metrics in the report equal a recomputation from the stored counts.
    let cm = &json["metrics"][0]["confusion"];
    let counts = ["tp", "fp", "tn", "fn"].map(|k| cm[k].as_u64().unwrap());
    let m = qrobust_core::metrics::compute_metrics(&qrobust_core::metrics::ConfusionMatrix::new(
        counts[0], counts[1], counts[2], counts[3],
    ))
    .unwrap();
    assert_eq!(json["metrics"][0]["metrics"]["mcc"].as_f64().unwrap(), m.mcc);

    ok(&[&["report"], &common[..]].concat());
    assert_eq!(fs::read_to_string(dir.join("report.json")).unwrap(), text);

    // An invalid report is caught by the schema.
    let mut broken = json.clone();
    broken["sweeps"][0]["rows"][0]["adv_acc"] = serde_json::json!(1.5);
    assert!(!validator.is_valid(&broken));
}

#[test]
fn custom_epsilon_flags_and_single_attack() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().to_str().unwrap();
    let common = ["--out", out, "--model", "classical-vgg"];
    ok(&[&["train"], &common[..]].concat());
    ok(&[
        &["attack", "--attack", "pgd", "--eps-start", "0", "--eps-end", "0.3", "--eps-step", "0.1"],
        &common[..],
    ]
    .concat());
    let dir = tmp.path().join("classical-vgg-seed0");
    let rows = lines(&dir.join("sweep_pgd.csv"));
    assert_eq!(rows.len(), 5);
    assert!(rows[1].starts_with("0.0,"));
    let zero: Vec<&str> = rows[1].split(',').collect();
    assert_eq!(zero[1], zero[2]);
    assert_eq!(zero[3], "0.0");
    assert!(!dir.join("sweep_ga.csv").exists());
}

#[test]
fn report_on_empty_dir_lists_every_missing_artifact() {
    let tmp = TempDir::new().unwrap();
    let o = qrobust(&["report", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    for name in ["config.toml", "checkpoint.json", "history.csv", "metrics.csv", "sweep_<attack>.csv"] {
        assert!(err.contains(name), "{name} not flagged in:\n{err}");
    }
}

#[test]
fn report_flags_a_corrupt_file() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().to_str().unwrap();
    ok(&["train", "--out", out, "--model", "classical-vgg", "--run-id", "x"]);
    ok(&["attack", "--out", out, "--model", "classical-vgg", "--run-id", "x", "--attack", "fgsa"]);
    let dir = tmp.path().join("x");
    fs::write(dir.join("metrics.csv"), "model,tp\nfoo,1\n").unwrap();
    let o = qrobust(&["report", dir.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("metrics.csv: unexpected header"), "{}", stderr(&o));
}

#[test]
fn search_limit_truncates_and_top_k_round_trips() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "s.toml",
        "model = \"hybrid-alex\"\n[dataset]\nsamples = 60\nfeature_dim = 3\n[search]\nbudget_epochs = 1\ntop_k = 3\nrefine_epochs = 0\n",
    );
    let args = ["search", "--config", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap(), "--limit", "10"];
    ok(&args);
    let dir = tmp.path().join("hybrid-alex-seed0");
    let rows = lines(&dir.join("search.csv"));
    assert_eq!(rows[0], "rank,spec_id,clean_acc,adv_acc,objective,seconds");
    assert_eq!(rows.len(), 11);
    let mut ids: Vec<usize> = rows[1..].iter().map(|r| r.split(',').nth(1).unwrap().parse().unwrap()).collect();
    ids.sort();
    assert_eq!(ids, (0..10).collect::<Vec<_>>());
    let ranks: Vec<usize> = rows[1..].iter().map(|r| r.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(ranks, (1..=10).collect::<Vec<_>>());

    let top: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("search_topk.json")).unwrap()).unwrap();
    let top = top.as_array().unwrap();
    assert_eq!(top.len(), 3);
    for entry in top {
        let spec: CircuitSpec = serde_json::from_value(entry["spec"].clone()).unwrap();
        spec.validate().unwrap();
        assert_eq!(serde_json::to_value(&spec).unwrap(), entry["spec"]);
    }
    assert!(!dir.join("search_refined.csv").exists());
}

#[test]
fn default_space_search_covers_all_2160_specs() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "full.toml",
        "model = \"hybrid-alex\"\n[dataset]\nsamples = 24\nfeature_dim = 2\n[search]\nbudget_epochs = 1\nrefine_epochs = 0\n[train]\nbatch_size = 32\n",
    );
    ok(&["search", "--config", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    let rows = lines(&tmp.path().join("hybrid-alex-seed0/search.csv"));
    assert_eq!(rows.len(), 2161);
}

#[test]
fn synth_output_feeds_a_file_dataset_run() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().to_str().unwrap();
    ok(&["synth", "--out", out, "--run-id", "data", "--seed", "8"]);
    let csv = tmp.path().join("data/dataset.csv");
    assert_eq!(lines(&csv).len(), 232);

    let cfg = write_config(
        tmp.path(),
        "file.toml",
        &format!(
            "model = \"classical-alex\"\n[dataset]\nkind = \"file\"\npath = {:?}\ntrain_count = 182\nnormalize = true\n",
            csv.to_str().unwrap()
        ),
    );
    ok(&["train", "--config", cfg.to_str().unwrap(), "--out", out, "--run-id", "fromfile"]);
    let metrics = lines(&tmp.path().join("fromfile/metrics.csv"));
    let cols: Vec<&str> = metrics[1].split(',').collect();
    let total: u64 = cols[1..5].iter().map(|c| c.parse::<u64>().unwrap()).sum();
    assert_eq!(total, 49);
}

#[test]
fn pixel_dataset_attacks_stay_in_unit_range() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "pix.toml",
        "model = \"classical-alex\"\n[dataset]\nkind = \"pixels\"\nsamples = 80\n[train]\nepochs = 10\n",
    );
    let cfg = cfg.to_str().unwrap();
    let out = tmp.path().to_str().unwrap();
    ok(&["train", "--config", cfg, "--out", out]);
    ok(&["attack", "--config", cfg, "--out", out]);
    let rows = lines(&tmp.path().join("classical-alex-seed0/sweep_pgd.csv"));
    assert_eq!(rows.len(), 11);
}
