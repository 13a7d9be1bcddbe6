//! The five subcommands. Each writes plain files into the run directory and
//! returns their paths.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use qrobust_core::attacks::{self, AttackKind, SweepResult};
use qrobust_core::data::{self, SplitRule};
use qrobust_core::metrics::{self, REPORT_HEADER};
use qrobust_core::model::{self, Checkpoint, EpochRecord};
use qrobust_core::search::{self, SearchRecord};
use serde::Serialize;

use crate::config::ExperimentConfig;

pub const CONFIG_FILE: &str = "config.toml";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const HISTORY_FILE: &str = "history.csv";
pub const METRICS_FILE: &str = "metrics.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const REPORT_FILE: &str = "report.json";
pub const SEARCH_FILE: &str = "search.csv";
pub const SEARCH_REFINED_FILE: &str = "search_refined.csv";
pub const SEARCH_TOPK_FILE: &str = "search_topk.json";
pub const DATASET_FILE: &str = "dataset.csv";

pub const HISTORY_HEADER: &str = "epoch,learning_rate,train_loss,train_accuracy,test_loss,test_accuracy";
pub const SUMMARY_HEADER: &str = "attack,epsilon,min_adv_acc,clean_acc";

pub fn sweep_file(kind: AttackKind) -> String {
    format!("sweep_{kind}.csv")
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn prepare_run_dir(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let dir = cfg.run_dir();
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

pub fn history_csv(history: &[EpochRecord]) -> String {
    let mut out = format!("{HISTORY_HEADER}\n");
    for r in history {
        out.push_str(&format!(
            "{},{:?},{:?},{:?},{:?},{:?}\n",
            r.epoch, r.learning_rate, r.train_loss, r.train_accuracy, r.test_loss, r.test_accuracy
        ));
    }
    out
}

/// Trains the configured model and writes the resolved config, checkpoint,
/// per-epoch history and test-split metrics.
pub fn train(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let (train_set, test_set) = cfg.splits()?;
    let train_cfg = cfg.train_config();
    let mut m = cfg.model.build(train_set.feature_dim(), cfg.seed)?;
    eprintln!(
        "training {} on {} samples ({} test) for {} epochs",
        cfg.model,
        train_set.len(),
        test_set.len(),
        train_cfg.epochs
    );
    let history = model::train(&mut m, &train_set, &test_set, &train_cfg)?;
    let cm = model::evaluate(&m, &test_set)?;

    let dir = prepare_run_dir(cfg)?;
    let files = [
        (CONFIG_FILE, cfg.to_toml()),
        (
            CHECKPOINT_FILE,
            Checkpoint::from_model(&m, Some(cfg.model), Some(train_cfg), history.len(), cfg.seed).to_json(),
        ),
        (HISTORY_FILE, history_csv(&history)),
        (
            METRICS_FILE,
            format!(
                "{}\n{}\n",
                REPORT_HEADER.join(","),
                metrics::report_row(cfg.model.name(), &cm)?.join(",")
            ),
        ),
    ];
    let mut written = Vec::new();
    for (name, contents) in files {
        let path = dir.join(name);
        write(&path, &contents)?;
        written.push(path);
    }
    if let Some(last) = history.last() {
        eprintln!("final test accuracy {:.4}", last.test_accuracy);
    }
    Ok(written)
}

/// Rebuilds `summary.csv` from whichever sweep files exist in `dir`: one row
/// per attack with the lowest adversarial accuracy and the ε where it first
/// occurs.
pub fn write_summary(dir: &Path) -> Result<PathBuf> {
    let mut out = format!("{SUMMARY_HEADER}\n");
    for kind in AttackKind::ALL {
        let path = dir.join(sweep_file(kind));
        if !path.exists() {
            continue;
        }
        let sweep = read_sweep(&path, kind)?;
        if let Some(row) = sweep.min_accuracy() {
            out.push_str(&format!("{kind},{:?},{:?},{:?}\n", row.epsilon, row.adv_acc, row.clean_acc));
        }
    }
    let path = dir.join(SUMMARY_FILE);
    write(&path, &out)?;
    Ok(path)
}

pub fn read_sweep(path: &Path, kind: AttackKind) -> Result<SweepResult> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let header = reader.headers()?.iter().collect::<Vec<_>>().join(",");
    if header != attacks::SWEEP_HEADER {
        bail!("{}: unexpected header {header:?}", path.display());
    }
    let rows = reader
        .deserialize()
        .collect::<std::result::Result<Vec<_>, _>>()
        .with_context(|| format!("parsing {}", path.display()))?;
    Ok(SweepResult { kind, rows })
}

/// Runs every configured attack over the ε grid against a trained checkpoint.
pub fn attack(cfg: &ExperimentConfig, checkpoint: Option<&Path>) -> Result<Vec<PathBuf>> {
    let dir = cfg.run_dir();
    let ckpt_path = checkpoint.map(Path::to_path_buf).unwrap_or_else(|| dir.join(CHECKPOINT_FILE));
    if !ckpt_path.is_file() {
        bail!("checkpoint not found: {} (run `train` first)", ckpt_path.display());
    }
    let ckpt = Checkpoint::load(&ckpt_path).with_context(|| format!("loading {}", ckpt_path.display()))?;
    let m = ckpt.to_model()?;
    let (_, test_set) = cfg.splits()?;
    if test_set.feature_dim() != m.feature_dim() {
        bail!(
            "checkpoint {} expects {} features but the configured dataset has {}",
            ckpt_path.display(),
            m.feature_dim(),
            test_set.feature_dim()
        );
    }
    let grid = cfg.epsilons()?;
    fs::create_dir_all(&dir)?;
    let mut written = Vec::new();
    for &kind in &cfg.attack.kinds {
        eprintln!("{kind} sweep over {} ε values on {} samples", grid.len(), test_set.len());
        let sweep = attacks::epsilon_sweep(&m, &test_set, &cfg.attack_spec(kind), &grid)?;
        let path = dir.join(sweep_file(kind));
        write(&path, &sweep.to_csv())?;
        written.push(path);
    }
    written.push(write_summary(&dir)?);
    Ok(written)
}

#[derive(Debug, Serialize)]
struct TopSpec<'a> {
    rank: usize,
    spec_id: usize,
    objective: f64,
    spec: &'a qrobust_core::qnn::CircuitSpec,
}

fn top_k_json(records: &[SearchRecord], k: usize) -> String {
    let top: Vec<TopSpec> = records
        .iter()
        .take(k)
        .map(|r| TopSpec {
            rank: r.rank,
            spec_id: r.spec_id,
            objective: r.objective,
            spec: &r.spec,
        })
        .collect();
    let mut s = serde_json::to_string_pretty(&top).expect("search records serialize");
    s.push('\n');
    s
}

/// Enumerates the search space (optionally truncated), trains every candidate
/// on part of the training split and scores it on the rest.
pub fn search(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let specs = search::enumerate_space(&cfg.search_space())?;
    let limit = cfg.search.limit.unwrap_or(specs.len()).min(specs.len());
    let candidates: Vec<_> = specs.into_iter().take(limit).enumerate().collect();
    let (train_set, _) = cfg.splits()?;
    let (fit, val) = data::split(
        &train_set,
        SplitRule::Fraction(cfg.search.fit_fraction),
        cfg.dataset.stratified,
        cfg.seed,
    )?;
    let scfg = cfg.search_config();
    eprintln!(
        "searching {} candidates, {} epochs each ({} fit / {} validation samples)",
        candidates.len(),
        scfg.budget_epochs,
        fit.len(),
        val.len()
    );
    let ranked = search::run_search(&candidates, &fit, &val, &scfg)?;

    let dir = prepare_run_dir(cfg)?;
    let mut written = Vec::new();
    let path = dir.join(SEARCH_FILE);
    write(&path, &search::search_csv(&ranked))?;
    written.push(path);

    let k = cfg.search.top_k.min(ranked.len());
    let top = if cfg.search.refine_epochs > 0 && k > 0 {
        eprintln!("refining top {k} for {} epochs", cfg.search.refine_epochs);
        let refined = search::refine(&ranked, k, &fit, &val, &scfg, cfg.search.refine_epochs)?;
        let path = dir.join(SEARCH_REFINED_FILE);
        write(&path, &search::search_csv(&refined))?;
        written.push(path);
        refined
    } else {
        ranked
    };
    let path = dir.join(SEARCH_TOPK_FILE);
    write(&path, &top_k_json(&top, k))?;
    written.push(path);
    Ok(written)
}

/// Writes the configured dataset (unsplit) as a feature CSV.
pub fn synth(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let ds = cfg.dataset()?;
    let dir = prepare_run_dir(cfg)?;
    let path = dir.join(DATASET_FILE);
    data::save_features(&ds, &path)?;
    eprintln!("wrote {} samples with {} features", ds.len(), ds.feature_dim());
    Ok(vec![path])
}
