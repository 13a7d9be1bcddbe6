//! Declarative QNN layers.
//!
//! A [`CircuitSpec`] has four stages: a data-encoding stage, a variational
//! block repeated `repetitions` times, a pre-measurement stage, and a Pauli
//! measurement basis read out on every qubit. Gate angles are bound through
//! [`ParamSource`]s.
//!
//! Trainable slots are numbered locally inside each stage, densely from 0.
//! The layer's flat `theta` vector is laid out as
//! `[encoding | block rep 0 | block rep 1 | … | pre-measurement]`, so each
//! repetition of the variational block gets its own fresh parameters.
//!
//! JSON form of one gate entry:
//!
//! ```json
//! {"gate": "U3", "target": 0, "control": null,
//!  "params": [{"trainable": 0}, {"trainable": 1}, {"fixed": 0.5}]}
//! ```
//!
//! `{"input": i}` binds the i-th (already scaled) input angle.

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qsim::{GateApplication, GateKind, GateTag, Mat2, Pauli, StateVector, MAX_QUBITS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamSource {
    Fixed(f64),
    Input(usize),
    Trainable(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateSpec {
    pub gate: GateTag,
    pub target: usize,
    #[serde(default)]
    pub control: Option<usize>,
    #[serde(default)]
    pub params: Vec<ParamSource>,
}

impl GateSpec {
    pub fn single(gate: GateTag, target: usize, params: Vec<ParamSource>) -> Self {
        Self {
            gate,
            target,
            control: None,
            params,
        }
    }

    pub fn controlled(gate: GateTag, control: usize, target: usize, params: Vec<ParamSource>) -> Self {
        Self {
            gate,
            target,
            control: Some(control),
            params,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitSpec {
    pub n_qubits: usize,
    pub encoding: Vec<GateSpec>,
    pub variational_block: Vec<GateSpec>,
    pub repetitions: usize,
    pub pre_measurement: Vec<GateSpec>,
    pub measurement_basis: Pauli,
}

/// Ways of writing one input angle per qubit into the register.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncodingKind {
    /// `H` then `U1(input)` on each qubit, followed by a CZ chain.
    HU1CzChain,
    RY,
    RX,
    /// `H` then `RZ(input)` on each qubit, no entangler.
    HRZ,
}

impl EncodingKind {
    pub const ALL: [EncodingKind; 4] = [
        EncodingKind::HU1CzChain,
        EncodingKind::RY,
        EncodingKind::RX,
        EncodingKind::HRZ,
    ];

    pub fn label(self) -> &'static str {
        match self {
            EncodingKind::HU1CzChain => "H+U1+CZ",
            EncodingKind::RY => "RY",
            EncodingKind::RX => "RX",
            EncodingKind::HRZ => "H+RZ",
        }
    }

    pub fn build(self, n_qubits: usize) -> Vec<GateSpec> {
        let mut gates = Vec::new();
        for q in 0..n_qubits {
            let input = vec![ParamSource::Input(q)];
            match self {
                EncodingKind::HU1CzChain => {
                    gates.push(GateSpec::single(GateTag::H, q, vec![]));
                    gates.push(GateSpec::single(GateTag::U1, q, input));
                }
                EncodingKind::RY => gates.push(GateSpec::single(GateTag::RY, q, input)),
                EncodingKind::RX => gates.push(GateSpec::single(GateTag::RX, q, input)),
                EncodingKind::HRZ => {
                    gates.push(GateSpec::single(GateTag::H, q, vec![]));
                    gates.push(GateSpec::single(GateTag::RZ, q, input));
                }
            }
        }
        if self == EncodingKind::HU1CzChain {
            gates.extend(entangler_chain(GateTag::CZ, n_qubits, 0));
        }
        gates
    }
}

/// One `tag` gate per qubit; parameterized gates get consecutive trainable
/// slots starting at `first_slot`.
pub fn rotation_layer(tag: GateTag, n_qubits: usize, first_slot: usize) -> Vec<GateSpec> {
    let mut slot = first_slot;
    (0..n_qubits)
        .map(|q| {
            let params = (0..tag.arity())
                .map(|_| {
                    slot += 1;
                    ParamSource::Trainable(slot - 1)
                })
                .collect();
            GateSpec::single(tag, q, params)
        })
        .collect()
}

/// Nearest-neighbour chain `(0,1), (1,2), …` of a controlled gate.
pub fn entangler_chain(tag: GateTag, n_qubits: usize, first_slot: usize) -> Vec<GateSpec> {
    let mut slot = first_slot;
    (0..n_qubits.saturating_sub(1))
        .map(|q| {
            let params = (0..tag.arity())
                .map(|_| {
                    slot += 1;
                    ParamSource::Trainable(slot - 1)
                })
                .collect();
            GateSpec::controlled(tag, q, q + 1, params)
        })
        .collect()
}

fn count_trainable(gates: &[GateSpec]) -> usize {
    gates
        .iter()
        .flat_map(|g| &g.params)
        .filter(|p| matches!(p, ParamSource::Trainable(_)))
        .count()
}

/// Variational block: a rotation layer followed by an entangler chain.
pub fn variational_block(rotation: GateTag, entangler: GateTag, n_qubits: usize) -> Vec<GateSpec> {
    let mut block = rotation_layer(rotation, n_qubits, 0);
    let used = count_trainable(&block);
    block.extend(entangler_chain(entangler, n_qubits, used));
    block
}

/// Four-qubit circuit: H·U1 encoding with a CZ chain, `RZ` layer + CZ chain
/// repeated three times, `U2` pre-measurement, Y readout.
pub fn vgg_circuit() -> CircuitSpec {
    CircuitSpec {
        n_qubits: 4,
        encoding: EncodingKind::HU1CzChain.build(4),
        variational_block: variational_block(GateTag::RZ, GateTag::CZ, 4),
        repetitions: 3,
        pre_measurement: rotation_layer(GateTag::U2, 4, 0),
        measurement_basis: Pauli::Y,
    }
}

/// Three-qubit circuit: H·U1 encoding with a CZ chain, `U3` layer + CZ chain
/// repeated five times, `U1` pre-measurement, Y readout.
pub fn alexnet_circuit() -> CircuitSpec {
    CircuitSpec {
        n_qubits: 3,
        encoding: EncodingKind::HU1CzChain.build(3),
        variational_block: variational_block(GateTag::U3, GateTag::CZ, 3),
        repetitions: 5,
        pre_measurement: rotation_layer(GateTag::U1, 3, 0),
        measurement_basis: Pauli::Y,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Angle {
    Fixed(f64),
    Input(usize),
    Theta(usize),
}

#[derive(Debug, Clone, PartialEq)]
struct CompiledGate {
    tag: GateTag,
    target: usize,
    control: Option<usize>,
    angles: [Angle; 3],
}

/// Flattened gate list with every trainable slot mapped to its global index.
#[derive(Debug, Clone, PartialEq)]
struct Program {
    n_qubits: usize,
    gates: Vec<CompiledGate>,
    n_theta: usize,
    basis: Pauli,
}

impl CircuitSpec {
    pub fn encoding_trainables(&self) -> usize {
        count_trainable(&self.encoding)
    }

    pub fn block_trainables(&self) -> usize {
        count_trainable(&self.variational_block)
    }

    pub fn pre_measurement_trainables(&self) -> usize {
        count_trainable(&self.pre_measurement)
    }

    /// Total length of the flat `theta` vector.
    pub fn num_trainable(&self) -> usize {
        self.encoding_trainables()
            + self.block_trainables() * self.repetitions
            + self.pre_measurement_trainables()
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_QUBITS).contains(&self.n_qubits) {
            return Err(Error::QubitCount(self.n_qubits));
        }
        if self.repetitions == 0 {
            return Err(Error::Circuit("repetitions must be at least 1".into()));
        }
        for (stage, gates) in [
            ("encoding", &self.encoding),
            ("variational_block", &self.variational_block),
            ("pre_measurement", &self.pre_measurement),
        ] {
            let mut seen = Vec::new();
            for (i, g) in gates.iter().enumerate() {
                let ctx = |e: Error| Error::Circuit(format!("{stage}[{i}]: {e}"));
                let kind = GateKind::new(g.gate, &vec![0.0; g.params.len()]).map_err(ctx)?;
                GateApplication::new(kind, g.target, g.control)
                    .and_then(|app| app.check_indices(self.n_qubits))
                    .map_err(ctx)?;
                for p in &g.params {
                    match *p {
                        ParamSource::Input(slot) if slot >= self.n_qubits => {
                            return Err(Error::Circuit(format!(
                                "{stage}[{i}]: input slot {slot} exceeds qubit count {}",
                                self.n_qubits
                            )));
                        }
                        ParamSource::Trainable(slot) => seen.push(slot),
                        ParamSource::Fixed(v) if !v.is_finite() => {
                            return Err(Error::Circuit(format!("{stage}[{i}]: non-finite angle")));
                        }
                        _ => {}
                    }
                }
            }
            seen.sort_unstable();
            seen.dedup();
            if seen.iter().enumerate().any(|(i, &s)| i != s) {
                return Err(Error::Circuit(format!(
                    "{stage}: trainable slots must be dense from 0, got {seen:?}"
                )));
            }
        }
        Ok(())
    }

    fn compile(&self) -> Result<Program> {
        self.validate()?;
        let mut gates = Vec::new();
        let mut offset = 0;
        let mut emit = |stage: &[GateSpec], offset: usize| {
            for g in stage {
                let mut angles = [Angle::Fixed(0.0); 3];
                for (a, p) in angles.iter_mut().zip(&g.params) {
                    *a = match *p {
                        ParamSource::Fixed(v) => Angle::Fixed(v),
                        ParamSource::Input(i) => Angle::Input(i),
                        ParamSource::Trainable(s) => Angle::Theta(offset + s),
                    };
                }
                gates.push(CompiledGate {
                    tag: g.gate,
                    target: g.target,
                    control: g.control,
                    angles,
                });
            }
        };
        emit(&self.encoding, offset);
        offset += self.encoding_trainables();
        let per_block = self.block_trainables();
        for _ in 0..self.repetitions {
            emit(&self.variational_block, offset);
            offset += per_block;
        }
        emit(&self.pre_measurement, offset);
        offset += self.pre_measurement_trainables();
        Ok(Program {
            n_qubits: self.n_qubits,
            gates,
            n_theta: offset,
            basis: self.measurement_basis,
        })
    }
}

/// How derivatives of expectations with respect to gate angles are taken.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMethod {
    /// Exact shift rule: `[f(a+π/2) − f(a−π/2)] / 2`, with the four-term
    /// variant for controlled rotations.
    #[default]
    ParameterShift,
    /// Divided difference `[f(a+s) − f(a−s)] / 2s`.
    FiniteDifference(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct QnnGrads {
    pub theta: Vec<f64>,
    pub inputs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QnnLayer {
    spec: CircuitSpec,
    theta: Vec<f64>,
    program: Program,
}

/// Half-width of the uniform initialization interval for `theta`.
pub const THETA_INIT_RANGE: f64 = PI / 100.0;

impl QnnLayer {
    pub fn new(spec: CircuitSpec, theta: Vec<f64>) -> Result<Self> {
        let program = spec.compile()?;
        if theta.len() != program.n_theta {
            return Err(Error::Dimension {
                what: "theta",
                expected: program.n_theta,
                got: theta.len(),
            });
        }
        Ok(Self {
            spec,
            theta,
            program,
        })
    }

    /// `theta ~ U[−π/100, π/100]`, seeded.
    pub fn init(spec: CircuitSpec, seed: u64) -> Result<Self> {
        let n = spec.num_trainable();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let theta = (0..n)
            .map(|_| rng.random_range(-THETA_INIT_RANGE..=THETA_INIT_RANGE))
            .collect();
        Self::new(spec, theta)
    }

    pub fn spec(&self) -> &CircuitSpec {
        &self.spec
    }

    pub fn n_qubits(&self) -> usize {
        self.spec.n_qubits
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn theta_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    fn check_inputs(&self, inputs: &[f64]) -> Result<()> {
        if inputs.len() != self.n_qubits() {
            return Err(Error::Dimension {
                what: "qnn inputs",
                expected: self.n_qubits(),
                got: inputs.len(),
            });
        }
        Ok(())
    }

    /// Runs the bound circuit; `shift` adds `delta` to angle `k` of gate `g`.
    fn run(&self, inputs: &[f64], shift: Option<(usize, usize, f64)>) -> StateVector {
        let mut state = StateVector::new(self.program.n_qubits).expect("validated qubit count");
        let mut buf = [0.0; 3];
        for (gi, g) in self.program.gates.iter().enumerate() {
            let arity = g.tag.arity();
            for (k, slot) in buf.iter_mut().enumerate().take(arity) {
                *slot = match g.angles[k] {
                    Angle::Fixed(v) => v,
                    Angle::Input(i) => inputs[i],
                    Angle::Theta(t) => self.theta[t],
                };
                if let Some((sg, sk, delta)) = shift {
                    if sg == gi && sk == k {
                        *slot += delta;
                    }
                }
            }
            let kind = GateKind::new(g.tag, &buf[..arity]).expect("validated arity");
            let app = GateApplication {
                kind,
                target: g.target,
                control: g.control,
            };
            state.apply(&app).expect("validated indices");
        }
        state
    }

    fn readout(&self, state: &StateVector) -> Vec<f64> {
        (0..self.n_qubits())
            .map(|q| state.expectation(self.program.basis, q).expect("qubit in range"))
            .collect()
    }

    /// Per-qubit expectation values of the measurement basis, each in [−1, 1].
    pub fn forward(&self, inputs: &[f64]) -> Result<Vec<f64>> {
        self.check_inputs(inputs)?;
        Ok(self.readout(&self.run(inputs, None)))
    }

    /// Final state before measurement.
    pub fn state(&self, inputs: &[f64]) -> Result<StateVector> {
        self.check_inputs(inputs)?;
        Ok(self.run(inputs, None))
    }

    /// Samples `shots` measurements in the layer's basis and returns the most
    /// frequent basis index (lowest index on ties). Bit `q` of the result is
    /// qubit `q`'s outcome, 0 meaning eigenvalue +1.
    pub fn sample_readout(&self, inputs: &[f64], shots: u64, seed: u64) -> Result<usize> {
        let mut state = self.state(inputs)?;
        if let Some(m) = basis_change(self.program.basis) {
            for q in 0..self.n_qubits() {
                state.apply_matrix(q, &m);
            }
        }
        Ok(state.sample(shots, seed)?.argmax())
    }

    /// Gradients of `Σ_q upstream[q]·⟨P_q⟩` with respect to `theta` and to the
    /// input angles. An angle bound to several gates accumulates one shift
    /// contribution per gate. `with_theta = false` skips the trainable slots.
    pub fn gradients(
        &self,
        inputs: &[f64],
        upstream: &[f64],
        method: GradientMethod,
        with_theta: bool,
    ) -> Result<QnnGrads> {
        self.check_inputs(inputs)?;
        if upstream.len() != self.n_qubits() {
            return Err(Error::Dimension {
                what: "upstream gradient",
                expected: self.n_qubits(),
                got: upstream.len(),
            });
        }
        let occurrences: Vec<(usize, usize, Angle)> = self
            .program
            .gates
            .iter()
            .enumerate()
            .flat_map(|(gi, g)| (0..g.tag.arity()).map(move |k| (gi, k, g.angles[k])))
            .filter(|&(_, _, a)| match a {
                Angle::Fixed(_) => false,
                Angle::Input(_) => true,
                Angle::Theta(_) => with_theta,
            })
            .collect();

        let contract = |shift: f64, gi: usize, k: usize| -> f64 {
            let e = self.readout(&self.run(inputs, Some((gi, k, shift))));
            e.iter().zip(upstream).map(|(a, b)| a * b).sum()
        };

        let contributions: Vec<f64> = occurrences
            .par_iter()
            .map(|&(gi, k, _)| {
                let f = |s: f64| contract(s, gi, k);
                match method {
                    GradientMethod::FiniteDifference(s) => (f(s) - f(-s)) / (2.0 * s),
                    GradientMethod::ParameterShift => {
                        if is_controlled_rotation(self.program.gates[gi].tag) {
                            // generator eigenvalues {0, ±1/2}: four-term rule
                            let c1 = (SQRT_2 + 1.0) / (4.0 * SQRT_2);
                            let c2 = (SQRT_2 - 1.0) / (4.0 * SQRT_2);
                            c1 * (f(FRAC_PI_2) - f(-FRAC_PI_2))
                                - c2 * (f(3.0 * FRAC_PI_2) - f(-3.0 * FRAC_PI_2))
                        } else {
                            (f(FRAC_PI_2) - f(-FRAC_PI_2)) / 2.0
                        }
                    }
                }
            })
            .collect();

        let mut grads = QnnGrads {
            theta: vec![0.0; self.theta.len()],
            inputs: vec![0.0; self.n_qubits()],
        };
        for (&(_, _, angle), c) in occurrences.iter().zip(contributions) {
            match angle {
                Angle::Input(i) => grads.inputs[i] += c,
                Angle::Theta(t) => grads.theta[t] += c,
                Angle::Fixed(_) => unreachable!(),
            }
        }
        Ok(grads)
    }
}

fn is_controlled_rotation(tag: GateTag) -> bool {
    matches!(tag, GateTag::CRX | GateTag::CRY | GateTag::CRZ)
}

/// Rotation mapping the +1 eigenstate of `basis` onto `|0⟩`.
fn basis_change(basis: Pauli) -> Option<Mat2> {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let re = |x: f64| Complex64::new(x, 0.0);
    match basis {
        Pauli::Z => None,
        Pauli::X => Some([[re(r), re(r)], [re(r), re(-r)]]),
        // H·S†
        Pauli::Y => Some([
            [re(r), Complex64::new(0.0, -r)],
            [re(r), Complex64::new(0.0, r)],
        ]),
    }
}

pub fn qnn_forward(layer: &QnnLayer, inputs: &[f64]) -> Result<Vec<f64>> {
    layer.forward(inputs)
}

pub fn qnn_sample_readout(layer: &QnnLayer, inputs: &[f64], shots: u64, seed: u64) -> Result<usize> {
    layer.sample_readout(inputs, shots, seed)
}

pub fn param_shift_grads(layer: &QnnLayer, inputs: &[f64], upstream: &[f64]) -> Result<QnnGrads> {
    layer.gradients(inputs, upstream, GradientMethod::ParameterShift, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;
    use proptest::prelude::*;

    fn ry_encoder(n: usize, basis: Pauli) -> CircuitSpec {
        CircuitSpec {
            n_qubits: n,
            encoding: EncodingKind::RY.build(n),
            variational_block: vec![],
            repetitions: 1,
            pre_measurement: vec![],
            measurement_basis: basis,
        }
    }

    fn random_vec(n: usize, lo: f64, hi: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(lo..hi)).collect()
    }

    #[test]
    fn named_circuit_shapes() {
        let vgg = vgg_circuit();
        assert_eq!(vgg.n_qubits, 4);
        assert_eq!(vgg.repetitions, 3);
        assert_eq!(vgg.measurement_basis, Pauli::Y);
        assert_eq!(vgg.num_trainable(), 4 * 3 + 4 * 2);
        vgg.validate().unwrap();

        let alex = alexnet_circuit();
        assert_eq!(alex.n_qubits, 3);
        assert_eq!(alex.repetitions, 5);
        assert_eq!(alex.measurement_basis, Pauli::Y);
        alex.validate().unwrap();
    }

    #[test]
    fn alexnet_trainable_count_by_slot_enumeration() {
        let spec = alexnet_circuit();
        let program = spec.compile().unwrap();
        let mut slots: Vec<usize> = program
            .gates
            .iter()
            .flat_map(|g| g.angles[..g.tag.arity()].to_vec())
            .filter_map(|a| match a {
                Angle::Theta(t) => Some(t),
                _ => None,
            })
            .collect();
        slots.sort_unstable();
        slots.dedup();
        assert_eq!(slots.len(), 48);
        assert_eq!(slots, (0..48).collect::<Vec<_>>());
        assert_eq!(spec.num_trainable(), 48);
    }

    #[test]
    fn ry_encoder_extremes() {
        let layer = QnnLayer::new(ry_encoder(3, Pauli::Z), vec![]).unwrap();
        for e in layer.forward(&[0.0; 3]).unwrap() {
            assert!((e - 1.0).abs() < 1e-15);
        }
        for e in layer.forward(&[PI; 3]).unwrap() {
            assert!((e + 1.0).abs() < 1e-12);
        }
        assert!(matches!(layer.forward(&[0.0; 2]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn alexnet_forward_matches_kronecker_oracle() {
        let spec = alexnet_circuit();
        let layer = QnnLayer::new(spec.clone(), vec![0.0; 48]).unwrap();
        let out = layer.forward(&[0.0; 3]).unwrap();

        let program = spec.compile().unwrap();
        let apps: Vec<GateApplication> = program
            .gates
            .iter()
            .map(|g| {
                let kind = GateKind::new(g.tag, &vec![0.0; g.tag.arity()]).unwrap();
                GateApplication::new(kind, g.target, g.control).unwrap()
            })
            .collect();
        let psi = oracle::kron_simulate(3, &apps);
        for (q, e) in out.iter().enumerate() {
            let expected = oracle::kron_expectation(3, &psi, Pauli::Y, q);
            assert!((e - expected).abs() < 1e-10, "qubit {q}: {e} vs {expected}");
        }
    }

    #[test]
    fn sample_readout_examples() {
        let empty = CircuitSpec {
            n_qubits: 2,
            encoding: vec![],
            variational_block: vec![],
            repetitions: 1,
            pre_measurement: vec![],
            measurement_basis: Pauli::Z,
        };
        let layer = QnnLayer::new(empty, vec![]).unwrap();
        assert_eq!(layer.sample_readout(&[0.0, 0.0], 100, 1).unwrap(), 0);

        let spec = CircuitSpec {
            n_qubits: 2,
            encoding: vec![GateSpec::single(GateTag::RY, 0, vec![ParamSource::Input(0)])],
            variational_block: vec![],
            repetitions: 1,
            pre_measurement: vec![],
            measurement_basis: Pauli::Z,
        };
        let layer = QnnLayer::new(spec, vec![]).unwrap();
        assert_eq!(qnn_sample_readout(&layer, &[PI, 0.0], 1000, 9).unwrap(), 1);

        let noisy = QnnLayer::new(ry_encoder(2, Pauli::Z), vec![]).unwrap();
        let a = noisy.sample_readout(&[1.4, 1.7], 1000, 42).unwrap();
        let b = noisy.sample_readout(&[1.4, 1.7], 1000, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sample_readout_respects_measurement_basis() {
        // RX(π/2)|0⟩ is the −1 eigenstate of Y, so the Y-basis outcome is 1.
        let spec = CircuitSpec {
            n_qubits: 1,
            encoding: EncodingKind::RX.build(1),
            variational_block: vec![],
            repetitions: 1,
            pre_measurement: vec![],
            measurement_basis: Pauli::Y,
        };
        let layer = QnnLayer::new(spec, vec![]).unwrap();
        assert_eq!(layer.sample_readout(&[FRAC_PI_2], 500, 0).unwrap(), 1);
        assert_eq!(layer.sample_readout(&[-FRAC_PI_2], 500, 0).unwrap(), 0);
    }

    #[test]
    fn single_ry_gradient_closed_form() {
        let spec = CircuitSpec {
            n_qubits: 1,
            encoding: vec![],
            variational_block: rotation_layer(GateTag::RY, 1, 0),
            repetitions: 1,
            pre_measurement: vec![],
            measurement_basis: Pauli::Z,
        };
        let at = |theta: f64| {
            let layer = QnnLayer::new(spec.clone(), vec![theta]).unwrap();
            param_shift_grads(&layer, &[0.0], &[1.0]).unwrap().theta[0]
        };
        assert!(at(0.0).abs() < 1e-15);
        assert!((at(FRAC_PI_2) + 1.0).abs() < 1e-12);
    }

    fn check_against_fd(spec: CircuitSpec, seed: u64, tol: f64) {
        let n = spec.n_qubits;
        let p = spec.num_trainable();
        let theta = random_vec(p, -PI, PI, seed);
        let inputs = random_vec(n, -1.5, 1.5, seed + 1);
        let upstream = random_vec(n, -1.0, 1.0, seed + 2);
        let layer = QnnLayer::new(spec.clone(), theta.clone()).unwrap();
        let grads = param_shift_grads(&layer, &inputs, &upstream).unwrap();

        let objective = |theta: &[f64], inputs: &[f64]| -> f64 {
            let l = QnnLayer::new(spec.clone(), theta.to_vec()).unwrap();
            l.forward(inputs).unwrap().iter().zip(&upstream).map(|(a, b)| a * b).sum()
        };
        let fd_theta = oracle::central_gradient(&theta, 1e-5, |t| objective(t, &inputs));
        let fd_inputs = oracle::central_gradient(&inputs, 1e-5, |x| objective(&theta, x));
        for (i, (a, b)) in grads.theta.iter().zip(&fd_theta).enumerate() {
            assert!((a - b).abs() <= tol, "theta[{i}]: {a} vs {b}");
        }
        for (i, (a, b)) in grads.inputs.iter().zip(&fd_inputs).enumerate() {
            assert!((a - b).abs() <= tol, "input[{i}]: {a} vs {b}");
        }
    }

    #[test]
    fn alexnet_shift_gradients_match_finite_differences() {
        check_against_fd(alexnet_circuit(), 17, 1e-6);
    }

    #[test]
    fn vgg_shift_gradients_match_finite_differences() {
        check_against_fd(vgg_circuit(), 23, 1e-6);
    }

    #[test]
    fn controlled_rotations_use_exact_rule() {
        for ent in [GateTag::CRX, GateTag::CRY, GateTag::CRZ] {
            let spec = CircuitSpec {
                n_qubits: 3,
                encoding: EncodingKind::HRZ.build(3),
                variational_block: variational_block(GateTag::U2, ent, 3),
                repetitions: 2,
                pre_measurement: rotation_layer(GateTag::RX, 3, 0),
                measurement_basis: Pauli::X,
            };
            check_against_fd(spec, 31, 1e-6);
        }
    }

    #[test]
    fn shared_input_slot_accumulates() {
        // RY(x)·RY(x) = RY(2x): d⟨Z⟩/dx = −2 sin 2x.
        let spec = CircuitSpec {
            n_qubits: 1,
            encoding: vec![
                GateSpec::single(GateTag::RY, 0, vec![ParamSource::Input(0)]),
                GateSpec::single(GateTag::RY, 0, vec![ParamSource::Input(0)]),
            ],
            variational_block: vec![],
            repetitions: 1,
            pre_measurement: vec![],
            measurement_basis: Pauli::Z,
        };
        let layer = QnnLayer::new(spec, vec![]).unwrap();
        let x = 0.3;
        let g = param_shift_grads(&layer, &[x], &[1.0]).unwrap();
        assert!((g.inputs[0] + 2.0 * (2.0 * x).sin()).abs() < 1e-12);
    }

    #[test]
    fn finite_difference_mode_approximates_shift_rule() {
        let layer = QnnLayer::init(alexnet_circuit(), 4).unwrap();
        let inputs = [0.2, -0.4, 0.9];
        let up = [1.0, -0.5, 0.25];
        let exact = layer.gradients(&inputs, &up, GradientMethod::ParameterShift, true).unwrap();
        let fd = layer
            .gradients(&inputs, &up, GradientMethod::FiniteDifference(1e-4), true)
            .unwrap();
        for (a, b) in exact.theta.iter().zip(&fd.theta) {
            assert!((a - b).abs() < 1e-6);
        }
        let inputs_only = layer.gradients(&inputs, &up, GradientMethod::ParameterShift, false).unwrap();
        assert_eq!(inputs_only.inputs, exact.inputs);
        assert!(inputs_only.theta.iter().all(|&t| t == 0.0));
    }

    #[test]
    fn validation_errors() {
        let mut spec = alexnet_circuit();
        spec.encoding[1].params = vec![ParamSource::Input(7)];
        assert!(matches!(QnnLayer::new(spec, vec![0.0; 48]), Err(Error::Circuit(_))));

        let mut spec = alexnet_circuit();
        spec.variational_block[0].params[0] = ParamSource::Trainable(40);
        assert!(spec.validate().is_err());

        let mut spec = alexnet_circuit();
        spec.pre_measurement[0].target = 3;
        assert!(spec.validate().is_err());

        assert!(matches!(
            QnnLayer::new(alexnet_circuit(), vec![0.0; 47]),
            Err(Error::Dimension { expected: 48, .. })
        ));
    }

    #[test]
    fn json_round_trip() {
        let spec = vgg_circuit();
        let json = serde_json::to_string(&spec).unwrap();
        assert!(json.contains(r#""gate":"U2""#));
        assert!(json.contains(r#"{"input":0}"#));
        let back: CircuitSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);
        let bad = json.replace(r#""gate":"U2""#, r#""gate":"U9""#);
        assert!(serde_json::from_str::<CircuitSpec>(&bad).is_err());
    }

    fn unrolled(spec: &CircuitSpec) -> CircuitSpec {
        let per = spec.block_trainables();
        let mut block = Vec::new();
        for r in 0..spec.repetitions {
            for g in &spec.variational_block {
                let mut g = g.clone();
                for p in &mut g.params {
                    if let ParamSource::Trainable(s) = p {
                        *s += r * per;
                    }
                }
                block.push(g);
            }
        }
        CircuitSpec {
            variational_block: block,
            repetitions: 1,
            ..spec.clone()
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn outputs_bounded(seed in any::<u64>(), scale in 0.1f64..20.0) {
            let layer = QnnLayer::new(vgg_circuit(), random_vec(20, -scale, scale, seed)).unwrap();
            let out = layer.forward(&random_vec(4, -scale, scale, seed ^ 1)).unwrap();
            prop_assert!(out.iter().all(|e| (-1.0..=1.0).contains(e)));
        }

        #[test]
        fn repetition_unrolling_is_transparent(seed in any::<u64>()) {
            let spec = alexnet_circuit();
            let theta = random_vec(48, -PI, PI, seed);
            let inputs = random_vec(3, -1.5, 1.5, seed ^ 7);
            let up = [0.3, -1.0, 0.7];
            let a = QnnLayer::new(spec.clone(), theta.clone()).unwrap();
            let b = QnnLayer::new(unrolled(&spec), theta).unwrap();
            let (fa, fb) = (a.forward(&inputs).unwrap(), b.forward(&inputs).unwrap());
            for (x, y) in fa.iter().zip(&fb) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
            let (ga, gb) = (param_shift_grads(&a, &inputs, &up).unwrap(), param_shift_grads(&b, &inputs, &up).unwrap());
            for (x, y) in ga.theta.iter().zip(&gb.theta).chain(ga.inputs.iter().zip(&gb.inputs)) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
        }

        #[test]
        fn forward_is_bitwise_deterministic(seed in any::<u64>()) {
            let layer = QnnLayer::init(alexnet_circuit(), seed).unwrap();
            let x = random_vec(3, -1.0, 1.0, seed);
            prop_assert_eq!(layer.forward(&x).unwrap(), layer.forward(&x).unwrap());
        }
    }
}
