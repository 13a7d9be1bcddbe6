//! Enumeration and ranking of QNN circuit architectures.
//!
//! A [`SearchSpace`] is a cartesian product of stage options. Candidates are
//! numbered by their position in the lexicographic enumeration; that number
//! (`spec_id`) also seeds each candidate's model and shuffling stream, so a
//! search over a subset ranks its candidates exactly as the full run would.

use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attacks::{self, AttackKind, AttackSpec, Clip};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{self, HybridModel, Model, TrainConfig};
use crate::qnn::{self, CircuitSpec, EncodingKind};
use crate::qsim::{GateTag, Pauli};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PreMeasurement {
    #[serde(rename = "none")]
    Nothing,
    U1,
    U2,
    U3,
    H,
}

impl PreMeasurement {
    pub const ALL: [PreMeasurement; 5] = [
        PreMeasurement::Nothing,
        PreMeasurement::U1,
        PreMeasurement::U2,
        PreMeasurement::U3,
        PreMeasurement::H,
    ];

    fn gate(self) -> Option<GateTag> {
        match self {
            PreMeasurement::Nothing => None,
            PreMeasurement::U1 => Some(GateTag::U1),
            PreMeasurement::U2 => Some(GateTag::U2),
            PreMeasurement::U3 => Some(GateTag::U3),
            PreMeasurement::H => Some(GateTag::H),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub encoding_options: Vec<EncodingKind>,
    pub variational_gate_options: Vec<GateTag>,
    pub entangler_options: Vec<GateTag>,
    pub repetition_options: Vec<usize>,
    pub pre_measurement_options: Vec<PreMeasurement>,
    pub n_qubits_options: Vec<usize>,
    pub measurement_basis: Pauli,
}

impl SearchSpace {
    /// Full product of stage options for one register width: 4 encodings,
    /// 6 rotations, 6 entanglers, 3 depths and 5 pre-measurement choices.
    pub fn default_for(n_qubits: usize) -> Self {
        Self {
            encoding_options: EncodingKind::ALL.to_vec(),
            variational_gate_options: vec![
                GateTag::RX,
                GateTag::RY,
                GateTag::RZ,
                GateTag::U1,
                GateTag::U2,
                GateTag::U3,
            ],
            entangler_options: vec![
                GateTag::CX,
                GateTag::CY,
                GateTag::CZ,
                GateTag::CRX,
                GateTag::CRY,
                GateTag::CRZ,
            ],
            repetition_options: vec![1, 3, 5],
            pre_measurement_options: PreMeasurement::ALL.to_vec(),
            n_qubits_options: vec![n_qubits],
            measurement_basis: Pauli::Y,
        }
    }

    pub fn size(&self) -> usize {
        self.encoding_options.len()
            * self.variational_gate_options.len()
            * self.entangler_options.len()
            * self.repetition_options.len()
            * self.pre_measurement_options.len()
            * self.n_qubits_options.len()
    }

    pub fn validate(&self) -> Result<()> {
        let lists = [
            ("encoding_options", self.encoding_options.len()),
            ("variational_gate_options", self.variational_gate_options.len()),
            ("entangler_options", self.entangler_options.len()),
            ("repetition_options", self.repetition_options.len()),
            ("pre_measurement_options", self.pre_measurement_options.len()),
            ("n_qubits_options", self.n_qubits_options.len()),
        ];
        if let Some((name, _)) = lists.iter().find(|(_, n)| *n == 0) {
            return Err(Error::InvalidArgument(format!("search space: {name} is empty")));
        }
        for &g in &self.variational_gate_options {
            if g.is_controlled() {
                return Err(Error::InvalidArgument(format!("search space: {g} is not a single-qubit gate")));
            }
        }
        for &g in &self.entangler_options {
            if !g.is_controlled() {
                return Err(Error::InvalidArgument(format!("search space: {g} is not a controlled gate")));
            }
        }
        if self.repetition_options.contains(&0) {
            return Err(Error::InvalidArgument("search space: repetitions must be ≥ 1".into()));
        }
        for &n in &self.n_qubits_options {
            if !(2..=crate::qsim::MAX_QUBITS).contains(&n) {
                return Err(Error::QubitCount(n));
            }
        }
        Ok(())
    }
}

/// Builds one candidate circuit from its stage choices.
pub fn candidate(
    encoding: EncodingKind,
    rotation: GateTag,
    entangler: GateTag,
    repetitions: usize,
    pre: PreMeasurement,
    n_qubits: usize,
    basis: Pauli,
) -> CircuitSpec {
    CircuitSpec {
        n_qubits,
        encoding: encoding.build(n_qubits),
        variational_block: qnn::variational_block(rotation, entangler, n_qubits),
        repetitions,
        pre_measurement: pre
            .gate()
            .map(|g| qnn::rotation_layer(g, n_qubits, 0))
            .unwrap_or_default(),
        measurement_basis: basis,
    }
}

/// Every spec of the space, last option list varying fastest.
pub fn enumerate_space(space: &SearchSpace) -> Result<Vec<CircuitSpec>> {
    space.validate()?;
    let mut out = Vec::with_capacity(space.size());
    for &enc in &space.encoding_options {
        for &rot in &space.variational_gate_options {
            for &ent in &space.entangler_options {
                for &reps in &space.repetition_options {
                    for &pre in &space.pre_measurement_options {
                        for &n in &space.n_qubits_options {
                            out.push(candidate(enc, rot, ent, reps, pre, n, space.measurement_basis));
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Training settings shared by all candidates; `epochs` is replaced by
    /// `budget_epochs`.
    pub train: TrainConfig,
    pub budget_epochs: usize,
    pub probe_epsilon: f64,
    pub clean_weight: f64,
    pub clip: Option<Clip>,
    pub seed: u64,
    /// Wall-clock seconds are recorded only when set; otherwise 0, keeping
    /// output byte-stable.
    pub record_time: bool,
}

impl SearchConfig {
    pub const DEFAULT_BUDGET: usize = 5;
    pub const DEFAULT_PROBE_EPSILON: f64 = 0.1;

    pub fn new(train: TrainConfig, seed: u64) -> Self {
        Self {
            train,
            budget_epochs: Self::DEFAULT_BUDGET,
            probe_epsilon: Self::DEFAULT_PROBE_EPSILON,
            clean_weight: 0.5,
            clip: None,
            seed,
            record_time: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.budget_epochs == 0 {
            return Err(Error::InvalidArgument("search budget must be ≥ 1 epoch".into()));
        }
        if !(0.0..=1.0).contains(&self.clean_weight) {
            return Err(Error::InvalidArgument("clean_weight must be in [0, 1]".into()));
        }
        AttackSpec::new(AttackKind::Fgsa, self.probe_epsilon).validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchRecord {
    pub rank: usize,
    pub spec_id: usize,
    pub clean_acc: f64,
    pub adv_acc: f64,
    pub objective: f64,
    pub seconds: f64,
    pub spec: CircuitSpec,
}

pub const SEARCH_HEADER: &str = "rank,spec_id,clean_acc,adv_acc,objective,seconds";

/// Model-init and shuffle seeds for candidate `spec_id`.
pub fn candidate_seeds(seed: u64, spec_id: usize) -> (u64, u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(spec_id as u64);
    (rng.next_u64(), rng.next_u64())
}

/// Trains one candidate for `epochs` and scores it on `val`.
pub fn evaluate_candidate(spec_id: usize, spec: &CircuitSpec, train: &Dataset, val: &Dataset, cfg: &SearchConfig, epochs: usize) -> Result<SearchRecord> {
    let start = Instant::now();
    let (model_seed, shuffle_seed) = candidate_seeds(cfg.seed, spec_id);
    let mut m = Model::Hybrid(HybridModel::init(train.feature_dim(), spec.clone(), model_seed)?);
    let train_cfg = TrainConfig {
        epochs,
        seed: shuffle_seed,
        ..cfg.train
    };
    model::train(&mut m, train, val, &train_cfg)?;
    let clean_acc = model::loss_and_accuracy(&m, val)?.1;
    let probe = AttackSpec {
        clip: cfg.clip,
        ..AttackSpec::new(AttackKind::Fgsa, cfg.probe_epsilon)
    };
    let sweep = attacks::epsilon_sweep(&m, val, &probe, &[cfg.probe_epsilon])?;
    let adv_acc = sweep.rows[0].adv_acc;
    Ok(SearchRecord {
        rank: 0,
        spec_id,
        clean_acc,
        adv_acc,
        objective: cfg.clean_weight * clean_acc + (1.0 - cfg.clean_weight) * adv_acc,
        seconds: if cfg.record_time {
            start.elapsed().as_secs_f64()
        } else {
            0.0
        },
        spec: spec.clone(),
    })
}

/// Sorts by objective (descending, ties by `spec_id`) and assigns ranks from 1.
pub fn rank_records(records: &mut [SearchRecord]) {
    records.sort_by(|a, b| b.objective.total_cmp(&a.objective).then(a.spec_id.cmp(&b.spec_id)));
    for (i, r) in records.iter_mut().enumerate() {
        r.rank = i + 1;
    }
}

/// Trains and scores every `(spec_id, spec)` candidate in parallel with the
/// search budget, then ranks them.
pub fn run_search(candidates: &[(usize, CircuitSpec)], train: &Dataset, val: &Dataset, cfg: &SearchConfig) -> Result<Vec<SearchRecord>> {
    cfg.validate()?;
    let mut records: Vec<SearchRecord> = candidates
        .par_iter()
        .map(|(id, spec)| evaluate_candidate(*id, spec, train, val, cfg, cfg.budget_epochs))
        .collect::<Result<_>>()?;
    rank_records(&mut records);
    Ok(records)
}

/// Second stage: retrains the `k` best records for `epochs` and re-ranks them.
pub fn refine(ranked: &[SearchRecord], k: usize, train: &Dataset, val: &Dataset, cfg: &SearchConfig, epochs: usize) -> Result<Vec<SearchRecord>> {
    let top: Vec<(usize, CircuitSpec)> = ranked
        .iter()
        .take(k)
        .map(|r| (r.spec_id, r.spec.clone()))
        .collect();
    let mut records: Vec<SearchRecord> = top
        .par_iter()
        .map(|(id, spec)| evaluate_candidate(*id, spec, train, val, cfg, epochs))
        .collect::<Result<_>>()?;
    rank_records(&mut records);
    Ok(records)
}

pub fn search_csv(records: &[SearchRecord]) -> String {
    let mut out = String::from(SEARCH_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{:?},{:?},{:?},{:?}\n",
            r.rank, r.spec_id, r.clean_acc, r.adv_acc, r.objective, r.seconds
        ));
    }
    out
}
