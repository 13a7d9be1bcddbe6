//! White-box evasion attacks on the input feature vector and ε sweeps.
//!
//! * gradient attack: `x + ε·∇ₓJ`
//! * fast gradient sign attack: `x + ε·sign(∇ₓJ)`, with `sign(0) = 0`
//! * projected gradient descent: repeated signed steps projected back onto
//!   the ℓ∞ ball of radius ε around the clean input

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::Classifier;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackKind {
    Ga,
    Fgsa,
    Pgd,
}

impl AttackKind {
    pub const ALL: [AttackKind; 3] = [AttackKind::Ga, AttackKind::Fgsa, AttackKind::Pgd];

    pub fn name(self) -> &'static str {
        match self {
            AttackKind::Ga => "ga",
            AttackKind::Fgsa => "fgsa",
            AttackKind::Pgd => "pgd",
        }
    }
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AttackKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AttackKind::ALL
            .into_iter()
            .find(|k| k.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidArgument(format!("unknown attack {s:?} (expected ga, fgsa or pgd)")))
    }
}

/// Elementwise feature bounds applied after every perturbation step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Clip {
    pub min: f64,
    pub max: f64,
}

impl Clip {
    pub const UNIT: Clip = Clip { min: 0.0, max: 1.0 };

    fn apply(self, x: &mut [f64]) {
        for v in x {
            *v = v.clamp(self.min, self.max);
        }
    }
}

pub const DEFAULT_PGD_STEPS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackSpec {
    pub kind: AttackKind,
    pub epsilon: f64,
    pub pgd_steps: usize,
    /// `None` means `ε/4`.
    pub pgd_step_size: Option<f64>,
    pub random_start: bool,
    pub clip: Option<Clip>,
    pub seed: u64,
}

impl AttackSpec {
    pub fn new(kind: AttackKind, epsilon: f64) -> Self {
        Self {
            kind,
            epsilon,
            pgd_steps: DEFAULT_PGD_STEPS,
            pgd_step_size: None,
            random_start: true,
            clip: None,
            seed: 0,
        }
    }

    pub fn with_epsilon(self, epsilon: f64) -> Self {
        Self { epsilon, ..self }
    }

    pub fn step_size(&self) -> f64 {
        self.pgd_step_size.unwrap_or(self.epsilon / 4.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!("epsilon must be ≥ 0, got {}", self.epsilon)));
        }
        if self.pgd_steps == 0 {
            return Err(Error::InvalidArgument("pgd_steps must be ≥ 1".into()));
        }
        if let Some(s) = self.pgd_step_size {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::InvalidArgument(format!("pgd_step_size must be > 0, got {s}")));
            }
        }
        if let Some(c) = self.clip {
            if c.min.is_nan() || c.max.is_nan() || c.min > c.max {
                return Err(Error::InvalidArgument(format!("clip bounds reversed: {} > {}", c.min, c.max)));
            }
        }
        Ok(())
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn input_grad<C: Classifier + ?Sized>(model: &C, x: &[f64], label: usize) -> Result<Vec<f64>> {
    Ok(model.loss_input_grad(x, label)?.1)
}

pub fn gradient_attack<C: Classifier + ?Sized>(model: &C, x: &[f64], label: usize, epsilon: f64, clip: Option<Clip>) -> Result<Vec<f64>> {
    let g = input_grad(model, x, label)?;
    let mut adv: Vec<f64> = x.iter().zip(&g).map(|(v, d)| v + epsilon * d).collect();
    if let Some(c) = clip {
        c.apply(&mut adv);
    }
    Ok(adv)
}

pub fn fgsa<C: Classifier + ?Sized>(model: &C, x: &[f64], label: usize, epsilon: f64, clip: Option<Clip>) -> Result<Vec<f64>> {
    let g = input_grad(model, x, label)?;
    let mut adv: Vec<f64> = x.iter().zip(&g).map(|(v, d)| v + epsilon * sign(*d)).collect();
    if let Some(c) = clip {
        c.apply(&mut adv);
    }
    Ok(adv)
}

/// Clamps every coordinate of `x` into `[x0 − ε, x0 + ε]`.
pub fn project_linf(x: &mut [f64], x0: &[f64], epsilon: f64) {
    for (v, c) in x.iter_mut().zip(x0) {
        *v = v.clamp(c - epsilon, c + epsilon);
    }
}

/// PGD from `x0`. The random start is drawn from `rng`.
pub fn pgd_with_rng<C: Classifier + ?Sized>(model: &C, x0: &[f64], label: usize, spec: &AttackSpec, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let eps = spec.epsilon;
    let step = spec.step_size();
    let mut x = x0.to_vec();
    if spec.random_start && eps > 0.0 {
        for v in x.iter_mut() {
            *v += rng.random_range(-eps..=eps);
        }
        if let Some(c) = spec.clip {
            c.apply(&mut x);
        }
    }
    for _ in 0..spec.pgd_steps {
        let g = input_grad(model, &x, label)?;
        for (v, d) in x.iter_mut().zip(&g) {
            *v += step * sign(*d);
        }
        project_linf(&mut x, x0, eps);
        if let Some(c) = spec.clip {
            c.apply(&mut x);
        }
    }
    Ok(x)
}

/// Random-start stream for sample `index`, independent of evaluation order.
pub fn sample_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

pub fn pgd<C: Classifier + ?Sized>(model: &C, x0: &[f64], label: usize, spec: &AttackSpec) -> Result<Vec<f64>> {
    pgd_with_rng(model, x0, label, spec, &mut sample_rng(spec.seed, 0))
}

/// Adversarial version of sample `index` under `spec`. With ε = 0 the input
/// is returned untouched.
pub fn perturb<C: Classifier + ?Sized>(model: &C, x: &[f64], label: usize, spec: &AttackSpec, index: usize) -> Result<Vec<f64>> {
    if spec.epsilon == 0.0 {
        return Ok(x.to_vec());
    }
    match spec.kind {
        AttackKind::Ga => gradient_attack(model, x, label, spec.epsilon, spec.clip),
        AttackKind::Fgsa => fgsa(model, x, label, spec.epsilon, spec.clip),
        AttackKind::Pgd => pgd_with_rng(model, x, label, spec, &mut sample_rng(spec.seed, index)),
    }
}

/// Attacks every sample of `dataset` in parallel; output is in sample order.
pub fn adversarial_examples<C: Classifier + ?Sized>(model: &C, dataset: &Dataset, spec: &AttackSpec) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    dataset
        .samples()
        .par_iter()
        .enumerate()
        .map(|(i, s)| perturb(model, &s.features, s.label, spec, i))
        .collect()
}

pub const DEFAULT_EPS_START: f64 = 0.05;
pub const DEFAULT_EPS_END: f64 = 0.5;
pub const DEFAULT_EPS_STEP: f64 = 0.05;

/// Ascending grid `start, start+step, …, end` (inclusive up to rounding),
/// each value rounded to 10 decimals so that `0.15` prints as `0.15`.
pub fn epsilon_grid(start: f64, end: f64, step: f64) -> Result<Vec<f64>> {
    if !(start >= 0.0 && start.is_finite() && end.is_finite()) {
        return Err(Error::InvalidArgument(format!("bad epsilon range {start}..{end}")));
    }
    if step.is_nan() || step <= 0.0 {
        return Err(Error::InvalidArgument(format!("epsilon step must be > 0, got {step}")));
    }
    if end < start {
        return Err(Error::InvalidArgument(format!("epsilon end {end} below start {start}")));
    }
    let n = ((end - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..n)
        .map(|i| ((start + i as f64 * step) * 1e10).round() / 1e10)
        .collect())
}

pub fn default_epsilon_grid() -> Vec<f64> {
    epsilon_grid(DEFAULT_EPS_START, DEFAULT_EPS_END, DEFAULT_EPS_STEP).expect("default grid is valid")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub epsilon: f64,
    pub clean_acc: f64,
    pub adv_acc: f64,
    pub success_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub kind: AttackKind,
    pub rows: Vec<SweepRow>,
}

pub const SWEEP_HEADER: &str = "epsilon,clean_acc,adv_acc,success_rate";

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(SWEEP_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!("{:?},{:?},{:?},{:?}\n", r.epsilon, r.clean_acc, r.adv_acc, r.success_rate));
        }
        out
    }

    /// Row with the lowest adversarial accuracy; ties go to the smallest ε.
    pub fn min_accuracy(&self) -> Option<&SweepRow> {
        self.rows
            .iter()
            .reduce(|best, r| if r.adv_acc < best.adv_acc { r } else { best })
    }
}

/// Counts for one ε: accuracy over all samples and the fraction of clean
/// hits turned into misses.
pub fn sweep_row(epsilon: f64, clean_correct: &[bool], adv_correct: &[bool]) -> SweepRow {
    let n = clean_correct.len().max(1) as f64;
    let hits = clean_correct.iter().filter(|&&c| c).count();
    let flipped = clean_correct
        .iter()
        .zip(adv_correct)
        .filter(|(&c, &a)| c && !a)
        .count();
    SweepRow {
        epsilon,
        clean_acc: hits as f64 / n,
        adv_acc: adv_correct.iter().filter(|&&a| a).count() as f64 / n,
        success_rate: if hits == 0 { 0.0 } else { flipped as f64 / hits as f64 },
    }
}

/// Attacks every sample of `dataset` at each ε in `epsilons`, reusing all
/// other settings of `spec`.
pub fn epsilon_sweep<C: Classifier + ?Sized>(model: &C, dataset: &Dataset, spec: &AttackSpec, epsilons: &[f64]) -> Result<SweepResult> {
    if epsilons.is_empty() {
        return Err(Error::InvalidArgument("epsilon list is empty".into()));
    }
    let samples = dataset.samples();
    let clean: Vec<bool> = samples
        .par_iter()
        .map(|s| Ok(model.predict(&s.features)? == s.label))
        .collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let spec = spec.with_epsilon(eps);
        spec.validate()?;
        let adv: Vec<bool> = samples
            .par_iter()
            .enumerate()
            .map(|(i, s)| {
                let x = perturb(model, &s.features, s.label, &spec, i)?;
                Ok(model.predict(&x)? == s.label)
            })
            .collect::<Result<_>>()?;
        rows.push(sweep_row(eps, &clean, &adv));
    }
    Ok(SweepResult { kind: spec.kind, rows })
}
