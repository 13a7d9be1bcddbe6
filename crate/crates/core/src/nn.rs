//! Small dense-layer toolkit with hand-written backward passes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `y = Wx + b` with `W` stored row-major (`out × in`).
#[derive(Debug, Clone, PartialEq)]
pub struct LinearLayer {
    in_dim: usize,
    out_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub grad_weights: Vec<f64>,
    pub grad_bias: Vec<f64>,
}

impl LinearLayer {
    pub fn from_parts(in_dim: usize, out_dim: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if weights.len() != in_dim * out_dim {
            return Err(Error::Dimension {
                what: "weights",
                expected: in_dim * out_dim,
                got: weights.len(),
            });
        }
        if bias.len() != out_dim {
            return Err(Error::Dimension {
                what: "bias",
                expected: out_dim,
                got: bias.len(),
            });
        }
        Ok(Self {
            in_dim,
            out_dim,
            grad_weights: vec![0.0; weights.len()],
            grad_bias: vec![0.0; out_dim],
            weights,
            bias,
        })
    }

    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self::from_parts(in_dim, out_dim, vec![0.0; in_dim * out_dim], vec![0.0; out_dim])
            .expect("shapes agree")
    }

    /// Glorot-uniform weights `±√(6/(in+out))`, zero bias.
    pub fn glorot(in_dim: usize, out_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let weights = (0..in_dim * out_dim)
            .map(|_| rng.random_range(-limit..=limit))
            .collect();
        Self::from_parts(in_dim, out_dim, weights, vec![0.0; out_dim]).expect("shapes agree")
    }

    pub fn glorot_seeded(in_dim: usize, out_dim: usize, seed: u64) -> Self {
        Self::glorot(in_dim, out_dim, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn num_params(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.in_dim {
            return Err(Error::Dimension {
                what: "linear input",
                expected: self.in_dim,
                got: x.len(),
            });
        }
        Ok(self
            .weights
            .chunks_exact(self.in_dim)
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + b)
            .collect())
    }

    /// Accumulates `upstream ⊗ x` into the weight gradient and `upstream` into
    /// the bias gradient; returns `Wᵀ·upstream`.
    pub fn backward(&mut self, x: &[f64], upstream: &[f64]) -> Result<Vec<f64>> {
        let input_grad = self.input_grad(x, upstream)?;
        accumulate_outer(x, upstream, &mut self.grad_weights, &mut self.grad_bias);
        Ok(input_grad)
    }

    /// `Wᵀ·upstream` without touching the accumulated gradients.
    pub fn input_grad(&self, x: &[f64], upstream: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.in_dim {
            return Err(Error::Dimension {
                what: "linear input",
                expected: self.in_dim,
                got: x.len(),
            });
        }
        if upstream.len() != self.out_dim {
            return Err(Error::Dimension {
                what: "linear upstream",
                expected: self.out_dim,
                got: upstream.len(),
            });
        }
        let mut out = vec![0.0; self.in_dim];
        for (row, &u) in self.weights.chunks_exact(self.in_dim).zip(upstream) {
            for (o, w) in out.iter_mut().zip(row) {
                *o += w * u;
            }
        }
        Ok(out)
    }

    pub fn zero_grad(&mut self) {
        self.grad_weights.iter_mut().for_each(|g| *g = 0.0);
        self.grad_bias.iter_mut().for_each(|g| *g = 0.0);
    }
}

/// `grad_w += upstream ⊗ x`, `grad_b += upstream` for a row-major weight
/// gradient buffer.
pub fn accumulate_outer(x: &[f64], upstream: &[f64], grad_w: &mut [f64], grad_b: &mut [f64]) {
    for ((row, &u), gb) in grad_w.chunks_exact_mut(x.len()).zip(upstream).zip(grad_b) {
        for (g, xi) in row.iter_mut().zip(x) {
            *g += u * xi;
        }
        *gb += u;
    }
}

pub fn relu(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| v.max(0.0)).collect()
}

/// Subgradient at 0 is 0.
pub fn relu_backward(x: &[f64], upstream: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(upstream)
        .map(|(&v, &u)| if v > 0.0 { u } else { 0.0 })
        .collect()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `−log softmax(logits)[label]` and its gradient `softmax − onehot`.
pub fn softmax_cross_entropy(logits: &[f64], label: usize) -> (f64, Vec<f64>) {
    let top = (0..logits.len())
        .reduce(|a, b| if logits[b] > logits[a] { b } else { a })
        .expect("non-empty logits");
    let max = logits[top];
    // ln_1p keeps small losses accurate when one logit dominates.
    let rest: f64 = (0..logits.len())
        .filter(|&i| i != top)
        .map(|i| (logits[i] - max).exp())
        .sum();
    let loss = (max - logits[label]) + rest.ln_1p();
    let mut grad = softmax(logits);
    grad[label] -= 1.0;
    (loss, grad)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    timestep: u64,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, learning_rate: f64, n_params: usize) -> Self {
        Self {
            kind,
            learning_rate,
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            eps: ADAM_EPS,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            timestep: 0,
        }
    }

    pub fn timestep(&self) -> u64 {
        self.timestep
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Dimension {
                what: "optimizer parameters",
                expected: self.m.len(),
                got: if params.len() != self.m.len() { params.len() } else { grads.len() },
            });
        }
        self.timestep += 1;
        let lr = self.learning_rate;
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grads) {
                    *p -= lr * g;
                }
            }
            OptimizerKind::Adam => {
                let t = self.timestep as i32;
                let c1 = 1.0 - self.beta1.powi(t);
                let c2 = 1.0 - self.beta2.powi(t);
                for i in 0..params.len() {
                    let g = grads[i];
                    self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
                    self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
                    let m_hat = self.m[i] / c1;
                    let v_hat = self.v[i] / c2;
                    params[i] -= lr * m_hat / (v_hat.sqrt() + self.eps);
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrScheduler {
    pub step_size: usize,
    pub gamma: f64,
}

impl LrScheduler {
    pub const DEFAULT_GAMMA: f64 = 0.1;

    pub fn new(step_size: usize, gamma: f64) -> Self {
        Self { step_size, gamma }
    }

    /// `lr0 · gamma^⌊epoch / step_size⌋`
    pub fn lr(&self, lr0: f64, epoch: usize) -> f64 {
        lr0 * self.gamma.powi((epoch / self.step_size) as i32)
    }
}

pub fn scheduler_lr(s: &LrScheduler, lr0: f64, epoch: usize) -> f64 {
    s.lr(lr0, epoch)
}
