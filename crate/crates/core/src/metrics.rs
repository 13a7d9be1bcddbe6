//! Binary confusion-matrix statistics.
//!
//! Any ratio with a zero denominator is reported as 0, and MCC is 0 whenever
//! one of `(tp+fp)`, `(tn+fn)`, `(tp+fn)`, `(tn+fp)` vanishes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, fp: u64, tn: u64, fn_: u64) -> Self {
        Self { tp, fp, tn, fn_ }
    }

    /// Tallies `(predicted, actual)` pairs; label 1 is positive.
    pub fn from_pairs<I>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut cm = Self::default();
        for (pred, actual) in pairs {
            cm.record(pred, actual);
        }
        cm
    }

    pub fn record(&mut self, predicted: usize, actual: usize) {
        match (predicted == 1, actual == 1) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, false) => self.tn += 1,
            (false, true) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// The matrix obtained by swapping the predicted classes.
    pub fn swap_predictions(&self) -> Self {
        Self {
            tp: self.fn_,
            fn_: self.tp,
            fp: self.tn,
            tn: self.fp,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub false_positive_rate: f64,
    pub precision: f64,
    pub f1: f64,
    pub mcc: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn compute_metrics(cm: &ConfusionMatrix) -> Result<MetricsReport> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::EmptyConfusionMatrix);
    }
    let ConfusionMatrix { tp, fp, tn, fn_ } = *cm;
    let sensitivity = ratio(tp, tp + fn_);
    let precision = ratio(tp, tp + fp);
    let f1 = if precision + sensitivity > 0.0 {
        2.0 * precision * sensitivity / (precision + sensitivity)
    } else {
        0.0
    };
    let sums = [tp + fp, tn + fn_, tp + fn_, tn + fp];
    let mcc = if sums.contains(&0) {
        0.0
    } else {
        let num = tp as f64 * tn as f64 - fp as f64 * fn_ as f64;
        let den = (sums[0] as f64 * sums[1] as f64 * sums[2] as f64 * sums[3] as f64).sqrt();
        (num / den).clamp(-1.0, 1.0)
    };
    Ok(MetricsReport {
        accuracy: ratio(tp + tn, total),
        sensitivity,
        specificity: ratio(tn, tn + fp),
        false_positive_rate: ratio(fp, fp + tn),
        precision,
        f1,
        mcc,
    })
}

/// Column order of [`report_row`], following the layout of the usual
/// per-model metrics table.
pub const REPORT_HEADER: [&str; 12] = [
    "model",
    "tp",
    "fp",
    "tn",
    "fn",
    "accuracy",
    "specificity",
    "sensitivity",
    "false_positive_rate",
    "precision",
    "f1",
    "mcc",
];

pub fn report_row(name: &str, cm: &ConfusionMatrix) -> Result<Vec<String>> {
    let m = compute_metrics(cm)?;
    let mut row = vec![
        name.to_string(),
        cm.tp.to_string(),
        cm.fp.to_string(),
        cm.tn.to_string(),
        cm.fn_.to_string(),
    ];
    row.extend(
        [
            m.accuracy,
            m.specificity,
            m.sensitivity,
            m.false_positive_rate,
            m.precision,
            m.f1,
            m.mcc,
        ]
        .iter()
        .map(|v| format!("{v:?}")),
    );
    Ok(row)
}
