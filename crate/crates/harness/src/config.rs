//! Experiment configuration: a versioned TOML document whose every field has
//! a default, so an empty file (or no file) describes the desk benchmark.

use std::path::{Path, PathBuf};

use qrobust_core::attacks::{self, AttackKind, AttackSpec, Clip};
use qrobust_core::data::{self, Dataset, SplitRule};
use qrobust_core::model::{TrainConfig, Variant};
use qrobust_core::nn::OptimizerKind;
use qrobust_core::search::{SearchConfig, SearchSpace};
use serde::{Deserialize, Serialize};

pub const CONFIG_SCHEMA: &str = "qrobust.config/v1";

/// A config problem, located by its dotted field path.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{field}: {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Learning rate tuned for the synthetic benchmark.
    #[default]
    Desk,
    /// Hyperparameters tuned for pretrained image features.
    Reference,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    #[default]
    Gaussian,
    Pixels,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub kind: DatasetKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    pub samples: usize,
    pub feature_dim: usize,
    pub separation: f64,
    pub noise: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_fraction: Option<f64>,
    pub stratified: bool,
    pub normalize: bool,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            kind: DatasetKind::Gaussian,
            path: None,
            samples: data::BENCH_SAMPLES,
            feature_dim: data::BENCH_FEATURE_DIM,
            separation: data::BENCH_SEPARATION,
            noise: 0.1,
            train_count: None,
            train_fraction: None,
            stratified: true,
            normalize: false,
        }
    }
}

/// Fields left unset fall back to the model's preset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainOverrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<OptimizerKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackConfig {
    pub kinds: Vec<AttackKind>,
    pub eps_start: f64,
    pub eps_end: f64,
    pub eps_step: f64,
    /// Explicit grid; replaces start/end/step when present.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilons: Option<Vec<f64>>,
    pub pgd_steps: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pgd_step_size: Option<f64>,
    pub random_start: bool,
    /// `[min, max]`; defaults to `[0, 1]` for pixel datasets, off otherwise.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clip: Option<[f64; 2]>,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            kinds: AttackKind::ALL.to_vec(),
            eps_start: attacks::DEFAULT_EPS_START,
            eps_end: attacks::DEFAULT_EPS_END,
            eps_step: attacks::DEFAULT_EPS_STEP,
            epsilons: None,
            pgd_steps: attacks::DEFAULT_PGD_STEPS,
            pgd_step_size: None,
            random_start: true,
            clip: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSettings {
    /// Register width of the searched circuits; defaults to the model's
    /// qubit count, or 4 for classical models.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_qubits: Option<usize>,
    /// Only the first `limit` enumerated specs are searched.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub limit: Option<usize>,
    pub budget_epochs: usize,
    pub probe_epsilon: f64,
    pub clean_weight: f64,
    /// Share of the training split used for fitting; the rest validates.
    pub fit_fraction: f64,
    pub top_k: usize,
    /// Epochs for retraining the top-k; 0 skips refinement.
    pub refine_epochs: usize,
    pub record_time: bool,
}

impl Default for SearchSettings {
    fn default() -> Self {
        Self {
            n_qubits: None,
            limit: None,
            budget_epochs: SearchConfig::DEFAULT_BUDGET,
            probe_epsilon: SearchConfig::DEFAULT_PROBE_EPSILON,
            clean_weight: 0.5,
            fit_fraction: 0.8,
            top_k: 5,
            refine_epochs: 25,
            record_time: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: String,
    pub seed: u64,
    pub out: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub run_id: Option<String>,
    pub model: Variant,
    pub preset: Preset,
    pub dataset: DatasetConfig,
    pub train: TrainOverrides,
    pub attack: AttackConfig,
    pub search: SearchSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema: CONFIG_SCHEMA.to_string(),
            seed: 0,
            out: PathBuf::from("runs"),
            run_id: None,
            model: Variant::HybridAlex,
            preset: Preset::Desk,
            dataset: DatasetConfig::default(),
            train: TrainOverrides::default(),
            attack: AttackConfig::default(),
            search: SearchSettings::default(),
        }
    }
}

fn check(ok: bool, field: &str, message: impl FnOnce() -> String) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError::new(field, message()))
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let de = toml::Deserializer::parse(text).map_err(|e| ConfigError::new("<document>", e.to_string()))?;
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let field = if path == "." { "<document>".to_string() } else { path };
            ConfigError::new(field, e.into_inner().to_string().trim_end())
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("--config", format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        check(self.schema == CONFIG_SCHEMA, "schema", || {
            format!("unsupported schema {:?} (expected {CONFIG_SCHEMA:?})", self.schema)
        })?;
        if let Some(id) = &self.run_id {
            check(
                !id.is_empty() && !id.contains(['/', '\\']) && id != "." && id != "..",
                "run_id",
                || format!("{id:?} is not a plain directory name"),
            )?;
        }

        let d = &self.dataset;
        match d.kind {
            DatasetKind::File => {
                let path = d
                    .path
                    .as_ref()
                    .ok_or_else(|| ConfigError::new("dataset.path", "required when dataset.kind = \"file\""))?;
                check(path.is_file(), "dataset.path", || format!("dataset file not found: {}", path.display()))?;
            }
            DatasetKind::Gaussian | DatasetKind::Pixels => {
                check(d.samples >= 4, "dataset.samples", || format!("need at least 4 samples, got {}", d.samples))?;
                check(d.feature_dim >= 1, "dataset.feature_dim", || "must be ≥ 1".into())?;
                check(d.separation.is_finite(), "dataset.separation", || "must be finite".into())?;
                check(d.noise >= 0.0 && d.noise.is_finite(), "dataset.noise", || "must be ≥ 0".into())?;
            }
        }
        check(d.train_count.is_none() || d.train_fraction.is_none(), "dataset.train_fraction", || {
            "set either train_count or train_fraction, not both".into()
        })?;
        if let Some(f) = d.train_fraction {
            check(f > 0.0 && f < 1.0, "dataset.train_fraction", || format!("must be in (0, 1), got {f}"))?;
        }
        if let (Some(k), DatasetKind::Gaussian | DatasetKind::Pixels) = (d.train_count, d.kind) {
            check(k >= 1 && k < d.samples, "dataset.train_count", || {
                format!("must be in 1..{}, got {k}", d.samples)
            })?;
        }

        self.train_config()
            .validate()
            .map_err(|e| ConfigError::new("train", e.to_string()))?;

        let a = &self.attack;
        check(!a.kinds.is_empty(), "attack.kinds", || "must list at least one attack".into())?;
        self.epsilons()?;
        check(a.pgd_steps >= 1, "attack.pgd_steps", || "must be ≥ 1".into())?;
        if let Some(s) = a.pgd_step_size {
            check(s > 0.0, "attack.pgd_step_size", || format!("must be > 0, got {s}"))?;
        }
        if let Some([lo, hi]) = a.clip {
            check(lo <= hi, "attack.clip", || format!("min {lo} exceeds max {hi}"))?;
        }

        let s = &self.search;
        check(s.budget_epochs >= 1, "search.budget_epochs", || "must be ≥ 1".into())?;
        check(s.probe_epsilon >= 0.0, "search.probe_epsilon", || "must be ≥ 0".into())?;
        check((0.0..=1.0).contains(&s.clean_weight), "search.clean_weight", || "must be in [0, 1]".into())?;
        check(s.fit_fraction > 0.0 && s.fit_fraction < 1.0, "search.fit_fraction", || {
            "must be in (0, 1)".into()
        })?;
        if let Some(l) = s.limit {
            check(l >= 1, "search.limit", || "must be ≥ 1".into())?;
        }
        self.search_space()
            .validate()
            .map_err(|e| ConfigError::new("search.n_qubits", e.to_string()))?;
        Ok(())
    }

    pub fn run_id(&self) -> String {
        self.run_id
            .clone()
            .unwrap_or_else(|| format!("{}-seed{}", self.model, self.seed))
    }

    pub fn run_dir(&self) -> PathBuf {
        self.out.join(self.run_id())
    }

    pub fn train_config(&self) -> TrainConfig {
        let base = match self.preset {
            Preset::Desk => self.model.desk_config(),
            Preset::Reference => self.model.reference_config(),
        };
        let t = &self.train;
        TrainConfig {
            epochs: t.epochs.unwrap_or(base.epochs),
            batch_size: t.batch_size.unwrap_or(base.batch_size),
            learning_rate: t.learning_rate.unwrap_or(base.learning_rate),
            optimizer: t.optimizer.unwrap_or(base.optimizer),
            step_size: t.step_size.unwrap_or(base.step_size),
            gamma: t.gamma.unwrap_or(base.gamma),
            seed: self.seed,
        }
    }

    /// The sweep grid, checked to be non-empty, non-negative and ascending.
    pub fn epsilons(&self) -> Result<Vec<f64>, ConfigError> {
        let a = &self.attack;
        let grid = match &a.epsilons {
            Some(list) => {
                check(!list.is_empty(), "attack.epsilons", || "must not be empty".into())?;
                list.clone()
            }
            None => attacks::epsilon_grid(a.eps_start, a.eps_end, a.eps_step)
                .map_err(|e| ConfigError::new("attack.eps_step", e.to_string()))?,
        };
        check(grid.iter().all(|e| *e >= 0.0 && e.is_finite()), "attack.epsilons", || {
            "values must be finite and ≥ 0".into()
        })?;
        check(grid.windows(2).all(|w| w[0] < w[1]), "attack.epsilons", || {
            "values must be strictly ascending".into()
        })?;
        Ok(grid)
    }

    pub fn clip(&self) -> Option<Clip> {
        match (self.attack.clip, self.dataset.kind) {
            (Some([min, max]), _) => Some(Clip { min, max }),
            (None, DatasetKind::Pixels) => Some(Clip::UNIT),
            (None, _) => None,
        }
    }

    pub fn attack_spec(&self, kind: AttackKind) -> AttackSpec {
        AttackSpec {
            pgd_steps: self.attack.pgd_steps,
            pgd_step_size: self.attack.pgd_step_size,
            random_start: self.attack.random_start,
            clip: self.clip(),
            seed: self.seed,
            ..AttackSpec::new(kind, 0.0)
        }
    }

    pub fn search_space(&self) -> SearchSpace {
        let n = self
            .search
            .n_qubits
            .unwrap_or(if self.model.is_hybrid() { self.model.width() } else { 4 });
        SearchSpace::default_for(n)
    }

    pub fn search_config(&self) -> SearchConfig {
        let s = &self.search;
        SearchConfig {
            budget_epochs: s.budget_epochs,
            probe_epsilon: s.probe_epsilon,
            clean_weight: s.clean_weight,
            clip: self.clip(),
            record_time: s.record_time,
            ..SearchConfig::new(self.train_config(), self.seed)
        }
    }

    pub fn split_rule(&self) -> SplitRule {
        let d = &self.dataset;
        match (d.train_count, d.train_fraction) {
            (Some(k), _) => SplitRule::TrainCount(k),
            (None, Some(f)) => SplitRule::Fraction(f),
            (None, None) if d.kind == DatasetKind::Gaussian && d.samples == data::BENCH_SAMPLES => {
                SplitRule::TrainCount(data::BENCH_TRAIN)
            }
            (None, None) => SplitRule::Fraction(0.8),
        }
    }

    /// The full dataset described by the config (before splitting).
    pub fn dataset(&self) -> qrobust_core::Result<Dataset> {
        let d = &self.dataset;
        match d.kind {
            DatasetKind::Gaussian => data::synth_dataset(d.samples, d.feature_dim, d.separation, self.seed),
            DatasetKind::Pixels => data::synth_pixels(d.samples, d.noise, self.seed),
            DatasetKind::File => data::load_features(d.path.as_ref().expect("validated")),
        }
    }

    /// Train and test splits, normalized with train statistics if requested.
    pub fn splits(&self) -> qrobust_core::Result<(Dataset, Dataset)> {
        let ds = self.dataset()?;
        let (train, test) = data::split(&ds, self.split_rule(), self.dataset.stratified, self.seed)?;
        if self.dataset.normalize {
            let (train, test, _) = data::normalize(&train, &test)?;
            Ok((train, test))
        } else {
            Ok((train, test))
        }
    }
}
