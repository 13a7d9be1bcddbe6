//! Consolidation of a run directory into one versioned JSON document.

use std::fs;
use std::path::Path;

use qrobust_core::attacks::{AttackKind, SweepRow};
use qrobust_core::metrics::{self, ConfusionMatrix, MetricsReport, REPORT_HEADER};
use qrobust_core::model::{Checkpoint, EpochRecord};
use serde::{Deserialize, Serialize};

use crate::commands::{self, CHECKPOINT_FILE, CONFIG_FILE, HISTORY_FILE, METRICS_FILE, REPORT_FILE};
use crate::config::ExperimentConfig;

pub const REPORT_SCHEMA: &str = "qrobust.report/v1";

/// JSON Schema describing `report.json`.
pub const REPORT_JSON_SCHEMA: &str = include_str!("../schema/report.schema.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsEntry {
    pub model: String,
    pub confusion: ConfusionMatrix,
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub attack: AttackKind,
    pub file: String,
    pub min_adv_acc: f64,
    pub min_epsilon: f64,
    pub rows: Vec<SweepRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema: String,
    pub run_id: String,
    pub checkpoint: String,
    pub config: ExperimentConfig,
    pub metrics: Vec<MetricsEntry>,
    pub history: Vec<EpochRecord>,
    pub sweeps: Vec<SweepEntry>,
}

/// Every problem found in a run directory, one line per file.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("run directory {dir} is incomplete:\n  {}", problems.join("\n  "))]
pub struct ReportError {
    pub dir: String,
    pub problems: Vec<String>,
}

fn read_metrics(path: &Path) -> Result<Vec<MetricsEntry>, String> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| e.to_string())?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| e.to_string())?
        .iter()
        .map(str::to_string)
        .collect();
    if header != REPORT_HEADER {
        return Err(format!("unexpected header {:?}", header.join(",")));
    }
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        let count = |col: usize| -> Result<u64, String> {
            rec[col]
                .parse()
                .map_err(|_| format!("row {}: column {} is not a count", i + 1, REPORT_HEADER[col]))
        };
        let confusion = ConfusionMatrix::new(count(1)?, count(2)?, count(3)?, count(4)?);
        let metrics = metrics::compute_metrics(&confusion).map_err(|e| format!("row {}: {e}", i + 1))?;
        out.push(MetricsEntry {
            model: rec[0].to_string(),
            confusion,
            metrics,
        });
    }
    if out.is_empty() {
        return Err("no metrics rows".into());
    }
    Ok(out)
}

fn read_history(path: &Path) -> Result<Vec<EpochRecord>, String> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| e.to_string())?;
    let header = reader.headers().map_err(|e| e.to_string())?.iter().collect::<Vec<_>>().join(",");
    if header != commands::HISTORY_HEADER {
        return Err(format!("unexpected header {header:?}"));
    }
    reader.deserialize().collect::<Result<_, _>>().map_err(|e| e.to_string())
}

/// Builds the report for `dir`. Metrics are recomputed from the stored
/// confusion counts.
pub fn build_report(dir: &Path) -> Result<RunReport, ReportError> {
    let mut problems = Vec::new();
    let mut missing = |name: &str| {
        let present = dir.join(name).is_file();
        if !present {
            problems.push(format!("{name}: missing"));
        }
        present
    };
    let have_config = missing(CONFIG_FILE);
    let have_ckpt = missing(CHECKPOINT_FILE);
    let have_history = missing(HISTORY_FILE);
    let have_metrics = missing(METRICS_FILE);
    let sweep_kinds: Vec<AttackKind> = AttackKind::ALL
        .into_iter()
        .filter(|k| dir.join(commands::sweep_file(*k)).is_file())
        .collect();
    if sweep_kinds.is_empty() {
        problems.push("sweep_<attack>.csv: missing (no sweep files; run `attack`)".into());
    }

    let mut config = None;
    if have_config {
        match fs::read_to_string(dir.join(CONFIG_FILE))
            .map_err(|e| e.to_string())
            .and_then(|t| ExperimentConfig::from_toml(&t).map_err(|e| e.to_string()))
        {
            Ok(c) => config = Some(c),
            Err(e) => problems.push(format!("{CONFIG_FILE}: {e}")),
        }
    }
    if have_ckpt {
        if let Err(e) = Checkpoint::load(dir.join(CHECKPOINT_FILE)) {
            problems.push(format!("{CHECKPOINT_FILE}: {e}"));
        }
    }
    let mut history = Vec::new();
    if have_history {
        match read_history(&dir.join(HISTORY_FILE)) {
            Ok(h) => history = h,
            Err(e) => problems.push(format!("{HISTORY_FILE}: {e}")),
        }
    }
    let mut metrics_rows = Vec::new();
    if have_metrics {
        match read_metrics(&dir.join(METRICS_FILE)) {
            Ok(m) => metrics_rows = m,
            Err(e) => problems.push(format!("{METRICS_FILE}: {e}")),
        }
    }
    let mut sweeps = Vec::new();
    for kind in sweep_kinds {
        let file = commands::sweep_file(kind);
        match commands::read_sweep(&dir.join(&file), kind) {
            Ok(s) => match s.min_accuracy() {
                Some(min) => sweeps.push(SweepEntry {
                    attack: kind,
                    file,
                    min_adv_acc: min.adv_acc,
                    min_epsilon: min.epsilon,
                    rows: s.rows.clone(),
                }),
                None => problems.push(format!("{file}: no rows")),
            },
            Err(e) => problems.push(format!("{file}: {e:#}")),
        }
    }

    let dir_name = dir.display().to_string();
    match config {
        Some(config) if problems.is_empty() => Ok(RunReport {
            schema: REPORT_SCHEMA.to_string(),
            run_id: dir
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default(),
            checkpoint: CHECKPOINT_FILE.to_string(),
            config,
            metrics: metrics_rows,
            history,
            sweeps,
        }),
        _ => Err(ReportError {
            dir: dir_name,
            problems,
        }),
    }
}

pub fn report_json(report: &RunReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

/// Writes `report.json` into `dir`.
pub fn write_report(dir: &Path) -> anyhow::Result<std::path::PathBuf> {
    let report = build_report(dir)?;
    let path = dir.join(REPORT_FILE);
    fs::write(&path, report_json(&report))?;
    Ok(path)
}
