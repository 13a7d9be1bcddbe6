//! Labelled feature vectors: CSV ingestion, synthetic generators, seeded
//! splitting and standardization.
//!
//! Label 1 is the positive class (stop sign), label 0 everything else.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const OTHER_SIGN: usize = 0;
pub const STOP_SIGN: usize = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    feature_dim: usize,
    samples: Vec<Sample>,
    normalized: bool,
}

impl Dataset {
    pub fn new(name: impl Into<String>, samples: Vec<Sample>) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| Error::Dataset("dataset is empty".into()))?;
        let feature_dim = first.features.len();
        if feature_dim == 0 {
            return Err(Error::Dataset("samples have no features".into()));
        }
        for (i, s) in samples.iter().enumerate() {
            if s.features.len() != feature_dim {
                return Err(Error::Dataset(format!(
                    "sample {i} has {} features, expected {feature_dim}",
                    s.features.len()
                )));
            }
            if s.label > 1 {
                return Err(Error::Dataset(format!("sample {i} has label {}", s.label)));
            }
            if s.features.iter().any(|v| !v.is_finite()) {
                return Err(Error::Dataset(format!("sample {i} has a non-finite feature")));
            }
        }
        Ok(Self {
            name: name.into(),
            feature_dim,
            samples,
            normalized: false,
        })
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// `[count of label 0, count of label 1]`
    pub fn class_counts(&self) -> [usize; 2] {
        let mut c = [0, 0];
        for s in &self.samples {
            c[s.label] += 1;
        }
        c
    }

    fn subset(&self, name: String, idx: &[usize]) -> Dataset {
        Dataset {
            name,
            feature_dim: self.feature_dim,
            samples: idx.iter().map(|&i| self.samples[i].clone()).collect(),
            normalized: self.normalized,
        }
    }
}

/// Reads `label,f0,f1,...` rows. A first row whose label cell is not a number
/// is treated as a header.
pub fn load_features(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let shown = path.display().to_string();
    let ingest = |row: usize, column: usize, message: String| Error::Ingest {
        path: shown.clone(),
        row,
        column,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;

    let mut samples = Vec::new();
    let mut dim: Option<usize> = None;
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        if record.iter().all(|c| c.is_empty()) {
            continue;
        }
        if row == 0 && record.get(0).is_some_and(|c| c.parse::<f64>().is_err()) {
            continue;
        }
        let n_features = record.len().saturating_sub(1);
        match dim {
            None if n_features == 0 => {
                return Err(ingest(row, 1, "row has no feature columns".into()));
            }
            None => dim = Some(n_features),
            Some(d) if d != n_features => {
                return Err(ingest(
                    row,
                    record.len().min(d + 1),
                    format!("expected {} columns, found {}", d + 1, record.len()),
                ));
            }
            Some(_) => {}
        }
        let label_cell = &record[0];
        let label = match label_cell.parse::<f64>() {
            Ok(0.0) => OTHER_SIGN,
            Ok(1.0) => STOP_SIGN,
            _ => return Err(ingest(row, 0, format!("label {label_cell:?} is not 0 or 1"))),
        };
        let features = record
            .iter()
            .enumerate()
            .skip(1)
            .map(|(col, cell)| match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(ingest(row, col, format!("{cell:?} is not a finite number"))),
            })
            .collect::<Result<Vec<f64>>>()?;
        samples.push(Sample { features, label });
    }
    if samples.is_empty() {
        return Err(ingest(0, 0, "file contains no samples".into()));
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Dataset::new(name, samples)
}

/// Writes the CSV layout read by [`load_features`], with a header row.
pub fn save_features(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["label".to_string()];
    header.extend((0..dataset.feature_dim).map(|i| format!("f{i}")));
    w.write_record(&header)?;
    for s in &dataset.samples {
        let mut row = vec![s.label.to_string()];
        row.extend(s.features.iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Two Gaussian clusters with unit isotropic noise, centred at
/// `±separation/2` along a seeded random unit direction. Even sample indices
/// get label 0, odd ones label 1, so class 0 holds `⌈n/2⌉` samples.
pub fn synth_dataset(n_samples: usize, feature_dim: usize, separation: f64, seed: u64) -> Result<Dataset> {
    if n_samples < 2 || feature_dim == 0 {
        return Err(Error::InvalidArgument(
            "synthetic dataset needs at least 2 samples and 1 feature".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let direction = unit_direction(feature_dim, &mut rng);
    let samples = (0..n_samples)
        .map(|i| {
            let label = i % 2;
            let sign = if label == STOP_SIGN { 0.5 } else { -0.5 };
            let features = direction
                .iter()
                .map(|d| sign * separation * d + rng.sample::<f64, _>(StandardNormal))
                .collect();
            Sample { features, label }
        })
        .collect();
    Dataset::new(format!("synthetic-gaussian-{seed}"), samples)
}

/// The unit direction used by [`synth_dataset`] for a given seed.
pub fn synth_direction(feature_dim: usize, seed: u64) -> Vec<f64> {
    unit_direction(feature_dim, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn unit_direction(dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

pub const BENCH_SAMPLES: usize = 231;
pub const BENCH_FEATURE_DIM: usize = 8;
pub const BENCH_SEPARATION: f64 = 6.0;
pub const BENCH_TRAIN: usize = 182;

/// The desk-scale benchmark: 231 Gaussian samples in 8 dimensions, split
/// 182/49 with stratification. Features are left unnormalized.
pub fn benchmark(seed: u64) -> Result<(Dataset, Dataset)> {
    let ds = synth_dataset(BENCH_SAMPLES, BENCH_FEATURE_DIM, BENCH_SEPARATION, seed)?;
    split(&ds, SplitRule::TrainCount(BENCH_TRAIN), true, seed)
}

pub const PIXEL_SIDE: usize = 8;

/// 8×8 images in `[0, 1]`: stop signs carry a bright horizontal bar, other
/// signs a vertical one, each at a jittered position over a dim noisy
/// background. Labels alternate as in [`synth_dataset`].
pub fn synth_pixels(n_samples: usize, noise: f64, seed: u64) -> Result<Dataset> {
    if n_samples < 2 {
        return Err(Error::InvalidArgument("synthetic dataset needs at least 2 samples".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..n_samples)
        .map(|i| {
            let label = i % 2;
            let offset = rng.random_range(2..PIXEL_SIDE - 3);
            let mut img = vec![0.0; PIXEL_SIDE * PIXEL_SIDE];
            for r in 0..PIXEL_SIDE {
                for c in 0..PIXEL_SIDE {
                    let on_bar = if label == STOP_SIGN {
                        r == offset || r == offset + 1
                    } else {
                        c == offset || c == offset + 1
                    };
                    let base = if on_bar { 0.85 } else { 0.15 };
                    let jitter: f64 = rng.sample(StandardNormal);
                    img[r * PIXEL_SIDE + c] = (base + noise * jitter).clamp(0.0, 1.0);
                }
            }
            Sample { features: img, label }
        })
        .collect();
    Dataset::new(format!("synthetic-pixels-{seed}"), samples)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitRule {
    /// Train share per class is `⌊count · fraction⌋`.
    Fraction(f64),
    /// Exactly this many training samples, apportioned across classes by
    /// largest remainder when stratified.
    TrainCount(usize),
}

/// Seeded shuffle-and-split; both parts must contain both classes.
pub fn split(dataset: &Dataset, rule: SplitRule, stratified: bool, seed: u64) -> Result<(Dataset, Dataset)> {
    let n = dataset.len();
    match rule {
        SplitRule::Fraction(f) if !(f > 0.0 && f < 1.0) => {
            return Err(Error::InvalidArgument(format!("train fraction {f} not in (0, 1)")));
        }
        SplitRule::TrainCount(k) if k == 0 || k >= n => {
            return Err(Error::InvalidArgument(format!(
                "train count {k} must be in 1..{n}"
            )));
        }
        _ => {}
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();

    if stratified {
        let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
        for (i, s) in dataset.samples.iter().enumerate() {
            by_class[s.label].push(i);
        }
        let quotas = match rule {
            SplitRule::Fraction(f) => by_class
                .iter()
                .map(|c| (c.len() as f64 * f + 1e-9).floor() as usize)
                .collect::<Vec<_>>(),
            SplitRule::TrainCount(k) => largest_remainder(k, &[by_class[0].len(), by_class[1].len()]),
        };
        for (members, quota) in by_class.iter_mut().zip(quotas) {
            members.shuffle(&mut rng);
            train_idx.extend_from_slice(&members[..quota]);
            test_idx.extend_from_slice(&members[quota..]);
        }
    } else {
        let mut all: Vec<usize> = (0..n).collect();
        all.shuffle(&mut rng);
        let k = match rule {
            SplitRule::Fraction(f) => (n as f64 * f + 1e-9).floor() as usize,
            SplitRule::TrainCount(k) => k,
        };
        train_idx.extend_from_slice(&all[..k]);
        test_idx.extend_from_slice(&all[k..]);
    }
    train_idx.sort_unstable();
    test_idx.sort_unstable();

    let train = dataset.subset(format!("{}-train", dataset.name), &train_idx);
    let test = dataset.subset(format!("{}-test", dataset.name), &test_idx);
    for (part, ds) in [("train", &train), ("test", &test)] {
        let counts = ds.class_counts();
        if counts.contains(&0) {
            return Err(Error::Dataset(format!(
                "{part} split is missing a class (counts {counts:?})"
            )));
        }
    }
    Ok((train, test))
}

fn largest_remainder(total: usize, sizes: &[usize]) -> Vec<usize> {
    let n: usize = sizes.iter().sum();
    let exact: Vec<f64> = sizes.iter().map(|&s| total as f64 * s as f64 / n as f64).collect();
    let mut quotas: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (exact[a] - exact[a].floor(), exact[b] - exact[b].floor());
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let mut left = total - quotas.iter().sum::<usize>();
    for i in order {
        if left == 0 {
            break;
        }
        quotas[i] += 1;
        left -= 1;
    }
    quotas
}

/// Per-feature standardization statistics estimated on a training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    pub fn fit(train: &Dataset) -> Self {
        let n = train.len() as f64;
        let d = train.feature_dim;
        let mut mean = vec![0.0; d];
        for s in &train.samples {
            for (m, v) in mean.iter_mut().zip(&s.features) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for s in &train.samples {
            for ((acc, v), m) in var.iter_mut().zip(&s.features).zip(&mean) {
                *acc += (v - m) * (v - m);
            }
        }
        let std = var.into_iter().map(|v| (v / n).sqrt()).collect();
        Self { mean, std }
    }

    /// Features with zero spread are centred but not scaled.
    pub fn apply(&self, dataset: &Dataset) -> Result<Dataset> {
        if dataset.normalized {
            return Err(Error::Dataset(format!("{} is already normalized", dataset.name)));
        }
        if dataset.feature_dim != self.mean.len() {
            return Err(Error::Dimension {
                what: "normalization statistics",
                expected: self.mean.len(),
                got: dataset.feature_dim,
            });
        }
        let samples = dataset
            .samples
            .iter()
            .map(|s| Sample {
                features: s
                    .features
                    .iter()
                    .zip(self.mean.iter().zip(&self.std))
                    .map(|(v, (m, sd))| if *sd > 0.0 { (v - m) / sd } else { v - m })
                    .collect(),
                label: s.label,
            })
            .collect();
        Ok(Dataset {
            name: dataset.name.clone(),
            feature_dim: dataset.feature_dim,
            samples,
            normalized: true,
        })
    }
}

pub fn normalize(train: &Dataset, test: &Dataset) -> Result<(Dataset, Dataset, NormStats)> {
    if train.is_empty() {
        return Err(Error::Dataset("cannot normalize an empty training set".into()));
    }
    let stats = NormStats::fit(train);
    Ok((stats.apply(train)?, stats.apply(test)?, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Write;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn load_three_rows() {
        let f = write_tmp("0,1.5,2\n1,0.25,-3\n0,7,8\n");
        let ds = load_features(f.path()).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.feature_dim(), 2);
        assert_eq!(ds.samples()[1].features, vec![0.25, -3.0]);
        assert_eq!(ds.class_counts(), [2, 1]);
    }

    #[test]
    fn load_skips_header() {
        let f = write_tmp("label,f0,f1\n1,1,2\n");
        assert_eq!(load_features(f.path()).unwrap().len(), 1);
    }

    #[test]
    fn load_reports_ragged_row() {
        let f = write_tmp("0,1,2\n1,3\n");
        let err = load_features(f.path()).unwrap_err();
        match err {
            Error::Ingest { row, .. } => assert_eq!(row, 1),
            e => panic!("unexpected {e}"),
        }
        assert!(load_features(f.path()).unwrap_err().to_string().contains("row 1"));
    }

    #[test]
    fn load_rejects_bad_cells() {
        let f = write_tmp("0,1,2\n2,3,4\n");
        assert!(matches!(load_features(f.path()), Err(Error::Ingest { row: 1, column: 0, .. })));
        let f = write_tmp("0,1,abc\n");
        assert!(matches!(load_features(f.path()), Err(Error::Ingest { row: 0, column: 2, .. })));
        let f = write_tmp("");
        assert!(load_features(f.path()).is_err());
        assert!(load_features("/nonexistent/features.csv").is_err());
    }

    #[test]
    fn save_load_round_trip() {
        let ds = synth_dataset(12, 3, 2.0, 4).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        save_features(&ds, f.path()).unwrap();
        let back = load_features(f.path()).unwrap();
        assert_eq!(back.samples(), ds.samples());
    }

    #[test]
    fn synth_benchmark_sized() {
        let ds = synth_dataset(231, 8, 6.0, 7).unwrap();
        assert_eq!(ds.len(), 231);
        assert_eq!(ds.feature_dim(), 8);
        assert_eq!(ds.class_counts(), [116, 115]);
        assert_eq!(ds, synth_dataset(231, 8, 6.0, 7).unwrap());
    }

    #[test]
    fn synth_class_means_separate_along_direction() {
        let (n, sep, seed) = (2000, 4.0, 3);
        let ds = synth_dataset(n, 5, sep, seed).unwrap();
        let d = synth_direction(5, seed);
        let mut proj = [0.0, 0.0];
        for s in ds.samples() {
            proj[s.label] += s.features.iter().zip(&d).map(|(a, b)| a * b).sum::<f64>();
        }
        let half = (n / 2) as f64;
        let gap = proj[1] / half - proj[0] / half;
        let tol = 3.0 * (2.0 / half.sqrt());
        assert!((gap - sep).abs() <= tol, "gap {gap}");
    }

    #[test]
    fn synth_pixels_bounded() {
        let ds = synth_pixels(20, 0.2, 1).unwrap();
        assert_eq!(ds.feature_dim(), 64);
        assert!(ds
            .samples()
            .iter()
            .flat_map(|s| &s.features)
            .all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn split_sizes() {
        let ds = synth_dataset(231, 4, 6.0, 1).unwrap();
        let (train, test) = split(&ds, SplitRule::TrainCount(182), true, 9).unwrap();
        assert_eq!((train.len(), test.len()), (182, 49));
        let (train, test) = split(&ds, SplitRule::Fraction(0.8), true, 9).unwrap();
        assert_eq!((train.len(), test.len()), (184, 47));

        let small = synth_dataset(10, 2, 6.0, 1).unwrap();
        let (train, test) = split(&small, SplitRule::Fraction(0.8), true, 3).unwrap();
        assert_eq!((train.len(), test.len()), (8, 2));
        assert!(split(&small, SplitRule::Fraction(1.0), true, 3).is_err());
    }

    #[test]
    fn split_rejects_missing_class() {
        let samples = (0..5)
            .map(|i| Sample {
                features: vec![i as f64],
                label: usize::from(i == 0),
            })
            .collect();
        let ds = Dataset::new("tiny", samples).unwrap();
        assert!(matches!(split(&ds, SplitRule::Fraction(0.8), true, 0), Err(Error::Dataset(_))));
    }

    #[test]
    fn normalize_contract() {
        let samples = (0..6)
            .map(|i| Sample {
                features: vec![i as f64, 3.0],
                label: i % 2,
            })
            .collect();
        let ds = Dataset::new("n", samples).unwrap();
        let (tr, te, stats) = normalize(&ds, &ds).unwrap();
        assert_eq!(stats.std[1], 0.0);
        assert!(tr.samples().iter().all(|s| s.features[1] == 0.0));
        let mean0: f64 = tr.samples().iter().map(|s| s.features[0]).sum::<f64>() / 6.0;
        assert!(mean0.abs() < 1e-10);
        assert_eq!(tr, te);
        assert!(stats.apply(&tr).is_err());
        assert!(normalize(&tr, &ds).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn splits_partition(n in 6usize..80, seed in any::<u64>(), frac in 0.3f64..0.8, strat in any::<bool>()) {
            let ds = synth_dataset(n, 2, 1.0, seed).unwrap();
            let Ok((train, test)) = split(&ds, SplitRule::Fraction(frac), strat, seed) else {
                return Ok(());
            };
            prop_assert_eq!(train.len() + test.len(), n);
            let mut all: Vec<_> = train.samples().iter().chain(test.samples()).map(|s| s.features.clone()).collect();
            all.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut orig: Vec<_> = ds.samples().iter().map(|s| s.features.clone()).collect();
            orig.sort_by(|a, b| a.partial_cmp(b).unwrap());
            prop_assert_eq!(all, orig);
            let again = split(&ds, SplitRule::Fraction(frac), strat, seed).unwrap();
            prop_assert_eq!(again.0, train);
        }
    }
}
