//! Classical and hybrid binary classifiers over a fixed feature vector.
//!
//! Classical: `linear1 → ReLU → linear2 → softmax`.
//! Hybrid: `linear1 → angle scaling → QNN layer → linear2 → softmax`.
//!
//! The feature vector is a leaf of the computation: gradients stop there and
//! are returned (for attacks), never applied.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::metrics::ConfusionMatrix;
use crate::nn::{self, LinearLayer, LrScheduler, OptimizerKind, OptimizerState};
use crate::qnn::{self, CircuitSpec, GradientMethod, QnnLayer};

pub const DESK_LEARNING_RATE: f64 = 0.02;

pub const CHECKPOINT_SCHEMA: &str = "qrobust.checkpoint/v1";

/// Map from `linear1` outputs to encoding angles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputScaling {
    /// `(π/2)·tanh(z)`, keeping angles inside `(−π/2, π/2)`.
    TanhHalfPi,
    Identity,
}

impl InputScaling {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            InputScaling::TanhHalfPi => FRAC_PI_2 * z.tanh(),
            InputScaling::Identity => z,
        }
    }

    pub fn derivative(self, z: f64) -> f64 {
        match self {
            InputScaling::TanhHalfPi => {
                let t = z.tanh();
                FRAC_PI_2 * (1.0 - t * t)
            }
            InputScaling::Identity => 1.0,
        }
    }
}

/// Anything that can be attacked: class probabilities plus the gradient of
/// the cross-entropy loss with respect to the input features.
pub trait Classifier: Sync {
    fn feature_dim(&self) -> usize;

    fn predict_proba(&self, x: &[f64]) -> Result<[f64; 2]>;

    fn loss_input_grad(&self, x: &[f64], label: usize) -> Result<(f64, Vec<f64>)>;

    /// Argmax of the probabilities; ties go to label 0.
    fn predict(&self, x: &[f64]) -> Result<usize> {
        let p = self.predict_proba(x)?;
        Ok(usize::from(p[1] > p[0]))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalModel {
    pub linear1: LinearLayer,
    pub linear2: LinearLayer,
}

pub const HIDDEN_RANGE: std::ops::RangeInclusive<usize> = 2..=8;

impl ClassicalModel {
    pub fn new(linear1: LinearLayer, linear2: LinearLayer) -> Result<Self> {
        let hidden = linear1.out_dim();
        if !HIDDEN_RANGE.contains(&hidden) {
            return Err(Error::InvalidArgument(format!(
                "hidden width {hidden} outside {HIDDEN_RANGE:?}"
            )));
        }
        if linear2.in_dim() != hidden || linear2.out_dim() != 2 {
            return Err(Error::Dimension {
                what: "linear2 shape",
                expected: hidden,
                got: linear2.in_dim(),
            });
        }
        Ok(Self { linear1, linear2 })
    }

    pub fn init(feature_dim: usize, hidden: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l1 = LinearLayer::glorot(feature_dim, hidden, &mut rng);
        let l2 = LinearLayer::glorot(hidden, 2, &mut rng);
        Self::new(l1, l2)
    }

    pub fn hidden(&self) -> usize {
        self.linear1.out_dim()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridModel {
    pub linear1: LinearLayer,
    pub qnn: QnnLayer,
    pub linear2: LinearLayer,
    pub input_scaling: InputScaling,
    pub gradient_method: GradientMethod,
}

impl HybridModel {
    pub fn new(linear1: LinearLayer, qnn: QnnLayer, linear2: LinearLayer, input_scaling: InputScaling) -> Result<Self> {
        let n = qnn.n_qubits();
        if linear1.out_dim() != n {
            return Err(Error::Dimension {
                what: "linear1 output vs qubit count",
                expected: n,
                got: linear1.out_dim(),
            });
        }
        if linear2.in_dim() != n || linear2.out_dim() != 2 {
            return Err(Error::Dimension {
                what: "linear2 input vs qubit count",
                expected: n,
                got: linear2.in_dim(),
            });
        }
        Ok(Self {
            linear1,
            qnn,
            linear2,
            input_scaling,
            gradient_method: GradientMethod::ParameterShift,
        })
    }

    pub fn init(feature_dim: usize, circuit: CircuitSpec, seed: u64) -> Result<Self> {
        let n = circuit.n_qubits;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l1 = LinearLayer::glorot(feature_dim, n, &mut rng);
        let qnn = QnnLayer::init(circuit, rng.random())?;
        let l2 = LinearLayer::glorot(n, 2, &mut rng);
        Self::new(l1, qnn, l2, InputScaling::TanhHalfPi)
    }

    /// Encoding angles for a feature vector.
    pub fn angles(&self, x: &[f64]) -> Result<Vec<f64>> {
        let z = self.linear1.forward(x)?;
        Ok(z.iter().map(|&v| self.input_scaling.apply(v)).collect())
    }

    /// Inference with a sampled readout: the most frequent basis outcome is
    /// mapped to `±1` per qubit (bit 0 → +1) and fed to `linear2`.
    pub fn predict_proba_shots(&self, x: &[f64], shots: u64, seed: u64) -> Result<[f64; 2]> {
        let angles = self.angles(x)?;
        let index = self.qnn.sample_readout(&angles, shots, seed)?;
        let e: Vec<f64> = (0..self.qnn.n_qubits())
            .map(|q| if index >> q & 1 == 0 { 1.0 } else { -1.0 })
            .collect();
        let p = nn::softmax(&self.linear2.forward(&e)?);
        Ok([p[0], p[1]])
    }
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCache {
    pub pre_activation: Vec<f64>,
    /// ReLU output (classical) or QNN expectations (hybrid).
    pub hidden: Vec<f64>,
    /// Encoding angles; empty for the classical head.
    pub angles: Vec<f64>,
    pub logits: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Classical(ClassicalModel),
    Hybrid(HybridModel),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossGrads {
    pub loss: f64,
    /// Same layout as [`Model::params`].
    pub params: Vec<f64>,
    pub input: Vec<f64>,
}

impl Model {
    pub fn feature_dim(&self) -> usize {
        match self {
            Model::Classical(m) => m.linear1.in_dim(),
            Model::Hybrid(m) => m.linear1.in_dim(),
        }
    }

    pub fn is_hybrid(&self) -> bool {
        matches!(self, Model::Hybrid(_))
    }

    fn layers(&self) -> (&LinearLayer, &LinearLayer) {
        match self {
            Model::Classical(m) => (&m.linear1, &m.linear2),
            Model::Hybrid(m) => (&m.linear1, &m.linear2),
        }
    }

    fn theta(&self) -> &[f64] {
        match self {
            Model::Classical(_) => &[],
            Model::Hybrid(m) => m.qnn.theta(),
        }
    }

    pub fn num_params(&self) -> usize {
        let (l1, l2) = self.layers();
        l1.num_params() + self.theta().len() + l2.num_params()
    }

    /// Flat parameter vector:
    /// `[linear1.weights, linear1.bias, theta, linear2.weights, linear2.bias]`.
    pub fn params(&self) -> Vec<f64> {
        let (l1, l2) = self.layers();
        let mut out = Vec::with_capacity(self.num_params());
        out.extend_from_slice(&l1.weights);
        out.extend_from_slice(&l1.bias);
        out.extend_from_slice(self.theta());
        out.extend_from_slice(&l2.weights);
        out.extend_from_slice(&l2.bias);
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(Error::Dimension {
                what: "flat parameters",
                expected: self.num_params(),
                got: params.len(),
            });
        }
        let (l1, theta, l2) = match self {
            Model::Classical(m) => (&mut m.linear1, &mut [][..], &mut m.linear2),
            Model::Hybrid(m) => (&mut m.linear1, m.qnn.theta_mut(), &mut m.linear2),
        };
        let mut rest = params;
        for dst in [
            &mut l1.weights[..],
            &mut l1.bias[..],
            theta,
            &mut l2.weights[..],
            &mut l2.bias[..],
        ] {
            let (head, tail) = rest.split_at(dst.len());
            dst.copy_from_slice(head);
            rest = tail;
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<([f64; 2], ForwardCache)> {
        let cache = match self {
            Model::Classical(m) => {
                let z = m.linear1.forward(x)?;
                let h = nn::relu(&z);
                let logits = m.linear2.forward(&h)?;
                ForwardCache {
                    pre_activation: z,
                    hidden: h,
                    angles: vec![],
                    logits,
                }
            }
            Model::Hybrid(m) => {
                let z = m.linear1.forward(x)?;
                let angles: Vec<f64> = z.iter().map(|&v| m.input_scaling.apply(v)).collect();
                let e = m.qnn.forward(&angles)?;
                let logits = m.linear2.forward(&e)?;
                ForwardCache {
                    pre_activation: z,
                    hidden: e,
                    angles,
                    logits,
                }
            }
        };
        let p = nn::softmax(&cache.logits);
        Ok(([p[0], p[1]], cache))
    }

    fn backprop(&self, x: &[f64], label: usize, with_params: bool) -> Result<LossGrads> {
        if label > 1 {
            return Err(Error::InvalidArgument(format!("label {label} is not 0 or 1")));
        }
        let (_, cache) = self.forward(x)?;
        let (loss, g_logits) = nn::softmax_cross_entropy(&cache.logits, label);
        let (l1, l2) = self.layers();
        let n_theta = self.theta().len();

        let d_hidden = l2.input_grad(&cache.hidden, &g_logits)?;
        let (d_pre, d_theta) = match self {
            Model::Classical(_) => (nn::relu_backward(&cache.pre_activation, &d_hidden), vec![]),
            Model::Hybrid(m) => {
                let q = m
                    .qnn
                    .gradients(&cache.angles, &d_hidden, m.gradient_method, with_params)?;
                let d_pre = q
                    .inputs
                    .iter()
                    .zip(&cache.pre_activation)
                    .map(|(g, &z)| g * m.input_scaling.derivative(z))
                    .collect();
                (d_pre, q.theta)
            }
        };
        let input = l1.input_grad(x, &d_pre)?;

        let mut params = Vec::new();
        if with_params {
            params = vec![0.0; self.num_params()];
            let (w1, rest) = params.split_at_mut(l1.weights.len());
            let (b1, rest) = rest.split_at_mut(l1.bias.len());
            let (th, rest) = rest.split_at_mut(n_theta);
            let (w2, b2) = rest.split_at_mut(l2.weights.len());
            nn::accumulate_outer(x, &d_pre, w1, b1);
            th.copy_from_slice(&d_theta);
            nn::accumulate_outer(&cache.hidden, &g_logits, w2, b2);
        }
        Ok(LossGrads { loss, params, input })
    }

    /// Cross-entropy loss with gradients for every parameter and for the
    /// input features.
    pub fn loss_grads(&self, x: &[f64], label: usize) -> Result<LossGrads> {
        self.backprop(x, label, true)
    }

    pub fn loss(&self, x: &[f64], label: usize) -> Result<f64> {
        let (_, cache) = self.forward(x)?;
        Ok(nn::softmax_cross_entropy(&cache.logits, label).0)
    }
}

impl Classifier for Model {
    fn feature_dim(&self) -> usize {
        Model::feature_dim(self)
    }

    fn predict_proba(&self, x: &[f64]) -> Result<[f64; 2]> {
        Ok(self.forward(x)?.0)
    }

    fn loss_input_grad(&self, x: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
        let g = self.backprop(x, label, false)?;
        Ok((g.loss, g.input))
    }
}

/// The four model configurations of the benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "classical-alex")]
    ClassicalAlex,
    #[serde(rename = "classical-vgg")]
    ClassicalVgg,
    #[serde(rename = "hybrid-alex")]
    HybridAlex,
    #[serde(rename = "hybrid-vgg")]
    HybridVgg,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::ClassicalAlex,
        Variant::ClassicalVgg,
        Variant::HybridAlex,
        Variant::HybridVgg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::ClassicalAlex => "classical-alex",
            Variant::ClassicalVgg => "classical-vgg",
            Variant::HybridAlex => "hybrid-alex",
            Variant::HybridVgg => "hybrid-vgg",
        }
    }

    pub fn is_hybrid(self) -> bool {
        matches!(self, Variant::HybridAlex | Variant::HybridVgg)
    }

    /// Hidden width (classical) or qubit count (hybrid).
    pub fn width(self) -> usize {
        match self {
            Variant::ClassicalAlex => 6,
            Variant::ClassicalVgg => 2,
            Variant::HybridAlex => 3,
            Variant::HybridVgg => 4,
        }
    }

    pub fn circuit(self) -> Option<CircuitSpec> {
        match self {
            Variant::HybridAlex => Some(qnn::alexnet_circuit()),
            Variant::HybridVgg => Some(qnn::vgg_circuit()),
            _ => None,
        }
    }

    /// Tuned hyperparameters reported for the pretrained-feature setting.
    pub fn reference_config(self) -> TrainConfig {
        let (batch_size, learning_rate, step_size) = match self {
            Variant::ClassicalVgg => (32, 0.000697, 8),
            Variant::ClassicalAlex => (64, 0.000269, 9),
            Variant::HybridVgg => (2, 0.000194, 8),
            Variant::HybridAlex => (8, 0.00291, 9),
        };
        TrainConfig {
            epochs: 25,
            batch_size,
            learning_rate,
            optimizer: OptimizerKind::Adam,
            step_size,
            gamma: LrScheduler::DEFAULT_GAMMA,
            seed: 0,
        }
    }

    /// Default desk-scale config: the reference schedule with a learning rate
    /// large enough to train the low-dimensional synthetic benchmark within
    /// 25 epochs.
    pub fn desk_config(self) -> TrainConfig {
        TrainConfig {
            learning_rate: DESK_LEARNING_RATE,
            ..self.reference_config()
        }
    }

    pub fn build(self, feature_dim: usize, seed: u64) -> Result<Model> {
        Ok(match self.circuit() {
            Some(circuit) => Model::Hybrid(HybridModel::init(feature_dim, circuit, seed)?),
            None => Model::Classical(ClassicalModel::init(feature_dim, self.width(), seed)?),
        })
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown model variant {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub step_size: usize,
    pub gamma: f64,
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(format!("train config: {what}")));
        if self.epochs == 0 {
            return bad("epochs must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.step_size == 0 {
            return bad("step_size must be positive");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must be in (0, 1]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub learning_rate: f64,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub test_loss: f64,
    pub test_accuracy: f64,
}

/// Mean loss and accuracy over a dataset.
pub fn loss_and_accuracy(model: &Model, dataset: &Dataset) -> Result<(f64, f64)> {
    let per_sample: Vec<(f64, bool)> = dataset
        .samples()
        .par_iter()
        .map(|s| {
            let (p, cache) = model.forward(&s.features)?;
            let loss = nn::softmax_cross_entropy(&cache.logits, s.label).0;
            Ok((loss, usize::from(p[1] > p[0]) == s.label))
        })
        .collect::<Result<_>>()?;
    let n = per_sample.len() as f64;
    let loss = per_sample.iter().map(|(l, _)| l).sum::<f64>() / n;
    let acc = per_sample.iter().filter(|(_, ok)| *ok).count() as f64 / n;
    Ok((loss, acc))
}

/// Mini-batch training with seeded shuffling. Each batch gradient is the mean
/// of per-sample gradients (computed in parallel, summed in sample order); the
/// learning rate follows the step schedule per epoch.
pub fn train(model: &mut Model, train_set: &Dataset, test_set: &Dataset, cfg: &TrainConfig) -> Result<Vec<EpochRecord>> {
    cfg.validate()?;
    if train_set.class_counts().contains(&0) {
        return Err(Error::Dataset("training set must contain both classes".into()));
    }
    if train_set.feature_dim() != model.feature_dim() {
        return Err(Error::Dimension {
            what: "training features",
            expected: model.feature_dim(),
            got: train_set.feature_dim(),
        });
    }
    let scheduler = LrScheduler::new(cfg.step_size, cfg.gamma);
    let mut opt = OptimizerState::new(cfg.optimizer, cfg.learning_rate, model.num_params());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let samples = train_set.samples();
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        opt.learning_rate = scheduler.lr(cfg.learning_rate, epoch);
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let snapshot = &*model;
            let grads: Vec<Vec<f64>> = batch
                .par_iter()
                .map(|&i| Ok(snapshot.loss_grads(&samples[i].features, samples[i].label)?.params))
                .collect::<Result<_>>()?;
            let mut mean = vec![0.0; model.num_params()];
            for g in &grads {
                for (m, v) in mean.iter_mut().zip(g) {
                    *m += v;
                }
            }
            let scale = 1.0 / batch.len() as f64;
            mean.iter_mut().for_each(|m| *m *= scale);
            let mut params = model.params();
            opt.step(&mut params, &mean)?;
            model.set_params(&params)?;
        }
        let (train_loss, train_accuracy) = loss_and_accuracy(model, train_set)?;
        let (test_loss, test_accuracy) = loss_and_accuracy(model, test_set)?;
        history.push(EpochRecord {
            epoch: epoch + 1,
            learning_rate: opt.learning_rate,
            train_loss,
            train_accuracy,
            test_loss,
            test_accuracy,
        });
    }
    Ok(history)
}

/// Confusion matrix of argmax predictions (label 1 positive).
pub fn evaluate<C: Classifier + ?Sized>(model: &C, dataset: &Dataset) -> Result<ConfusionMatrix> {
    let preds: Vec<usize> = dataset
        .samples()
        .par_iter()
        .map(|s| model.predict(&s.features))
        .collect::<Result<_>>()?;
    Ok(ConfusionMatrix::from_pairs(
        preds.into_iter().zip(dataset.samples().iter().map(|s| s.label)),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearParams {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl From<&LinearLayer> for LinearParams {
    fn from(l: &LinearLayer) -> Self {
        Self {
            in_dim: l.in_dim(),
            out_dim: l.out_dim(),
            weights: l.weights.clone(),
            bias: l.bias.clone(),
        }
    }
}

impl LinearParams {
    fn into_layer(self, field: &str) -> Result<LinearLayer> {
        LinearLayer::from_parts(self.in_dim, self.out_dim, self.weights, self.bias).map_err(|e| {
            Error::Checkpoint {
                field: field.into(),
                message: e.to_string(),
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Architecture {
    Classical {
        feature_dim: usize,
        hidden: usize,
    },
    Hybrid {
        feature_dim: usize,
        input_scaling: InputScaling,
        circuit: CircuitSpec,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub linear1: LinearParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
    pub linear2: LinearParams,
}

/// Versioned JSON snapshot of a model and how it was trained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub schema: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<Variant>,
    pub architecture: Architecture,
    pub params: ModelParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_config: Option<TrainConfig>,
    pub epoch: usize,
    pub seed: u64,
}

impl Checkpoint {
    pub fn from_model(model: &Model, variant: Option<Variant>, train_config: Option<TrainConfig>, epoch: usize, seed: u64) -> Self {
        let (architecture, params) = match model {
            Model::Classical(m) => (
                Architecture::Classical {
                    feature_dim: m.linear1.in_dim(),
                    hidden: m.hidden(),
                },
                ModelParams {
                    linear1: (&m.linear1).into(),
                    theta: None,
                    linear2: (&m.linear2).into(),
                },
            ),
            Model::Hybrid(m) => (
                Architecture::Hybrid {
                    feature_dim: m.linear1.in_dim(),
                    input_scaling: m.input_scaling,
                    circuit: m.qnn.spec().clone(),
                },
                ModelParams {
                    linear1: (&m.linear1).into(),
                    theta: Some(m.qnn.theta().to_vec()),
                    linear2: (&m.linear2).into(),
                },
            ),
        };
        Self {
            schema: CHECKPOINT_SCHEMA.to_string(),
            variant,
            architecture,
            params,
            train_config,
            epoch,
            seed,
        }
    }

    /// Rebuilds the model, checking every shape invariant.
    pub fn to_model(&self) -> Result<Model> {
        let bad = |field: &str, message: String| Error::Checkpoint {
            field: field.into(),
            message,
        };
        if self.schema != CHECKPOINT_SCHEMA {
            return Err(bad("schema", format!("unsupported schema {:?}", self.schema)));
        }
        let l1 = self.params.linear1.clone().into_layer("params.linear1")?;
        let l2 = self.params.linear2.clone().into_layer("params.linear2")?;
        let (feature_dim, width) = match &self.architecture {
            Architecture::Classical { feature_dim, hidden } => (*feature_dim, *hidden),
            Architecture::Hybrid { feature_dim, circuit, .. } => (*feature_dim, circuit.n_qubits),
        };
        if l1.in_dim() != feature_dim {
            return Err(bad(
                "params.linear1.in_dim",
                format!("{} does not match feature_dim {feature_dim}", l1.in_dim()),
            ));
        }
        if l1.out_dim() != width {
            return Err(bad(
                "params.linear1.out_dim",
                format!("{} does not match hidden width / qubit count {width}", l1.out_dim()),
            ));
        }
        if l2.in_dim() != width || l2.out_dim() != 2 {
            return Err(bad(
                "params.linear2",
                format!("shape {}x{} does not match {width}x2", l2.in_dim(), l2.out_dim()),
            ));
        }
        match &self.architecture {
            Architecture::Classical { .. } => {
                if self.params.theta.is_some() {
                    return Err(bad("params.theta", "classical model has no theta".into()));
                }
                Ok(Model::Classical(
                    ClassicalModel::new(l1, l2).map_err(|e| bad("architecture.hidden", e.to_string()))?,
                ))
            }
            Architecture::Hybrid {
                input_scaling,
                circuit,
                ..
            } => {
                let theta = self
                    .params
                    .theta
                    .clone()
                    .ok_or_else(|| bad("params.theta", "missing for hybrid model".into()))?;
                let qnn = QnnLayer::new(circuit.clone(), theta).map_err(|e| match e {
                    Error::Dimension { .. } => bad("params.theta", e.to_string()),
                    e => bad("architecture.circuit", e.to_string()),
                })?;
                Ok(Model::Hybrid(HybridModel::new(l1, qnn, l2, *input_scaling)?))
            }
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("checkpoint serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::Checkpoint {
                field: if path == "." { "<root>".into() } else { path },
                message: e.into_inner().to_string(),
            }
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let ckpt = Self::from_json(&text)?;
        ckpt.to_model()?;
        Ok(ckpt)
    }
}

pub fn save_checkpoint(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    Checkpoint::from_model(model, None, None, 0, 0).save(path)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Model> {
    Checkpoint::load(path)?.to_model()
}
