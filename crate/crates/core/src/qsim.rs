//! Dense state-vector simulation for small registers.
//!
//! Qubit ordering is little-endian: qubit `q` is bit `q` of the basis index,
//! so `|q1 q0⟩ = |01⟩` is index 1. Gates are applied by iterating amplitude
//! pairs at stride `2^target`, never by building Kronecker products.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_QUBITS: usize = 8;

pub type Mat2 = [[Complex64; 2]; 2];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Pauli operator used as a measurement basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    X,
    Y,
    Z,
}

impl fmt::Display for Pauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Pauli::X => "X",
            Pauli::Y => "Y",
            Pauli::Z => "Z",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GateTag {
    H,
    X,
    Y,
    Z,
    RX,
    RY,
    RZ,
    U1,
    U2,
    U3,
    CX,
    CY,
    CZ,
    CRX,
    CRY,
    CRZ,
}

impl GateTag {
    pub const ALL: [GateTag; 16] = [
        GateTag::H,
        GateTag::X,
        GateTag::Y,
        GateTag::Z,
        GateTag::RX,
        GateTag::RY,
        GateTag::RZ,
        GateTag::U1,
        GateTag::U2,
        GateTag::U3,
        GateTag::CX,
        GateTag::CY,
        GateTag::CZ,
        GateTag::CRX,
        GateTag::CRY,
        GateTag::CRZ,
    ];

    pub fn arity(self) -> usize {
        use GateTag::*;
        match self {
            H | X | Y | Z | CX | CY | CZ => 0,
            RX | RY | RZ | U1 | CRX | CRY | CRZ => 1,
            U2 => 2,
            U3 => 3,
        }
    }

    pub fn is_controlled(self) -> bool {
        use GateTag::*;
        matches!(self, CX | CY | CZ | CRX | CRY | CRZ)
    }

    pub fn name(self) -> &'static str {
        use GateTag::*;
        match self {
            H => "H",
            X => "X",
            Y => "Y",
            Z => "Z",
            RX => "RX",
            RY => "RY",
            RZ => "RZ",
            U1 => "U1",
            U2 => "U2",
            U3 => "U3",
            CX => "CX",
            CY => "CY",
            CZ => "CZ",
            CRX => "CRX",
            CRY => "CRY",
            CRZ => "CRZ",
        }
    }
}

impl fmt::Display for GateTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A gate tag together with its bound angles (radians).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateKind {
    tag: GateTag,
    params: [f64; 3],
}

impl GateKind {
    pub fn new(tag: GateTag, params: &[f64]) -> Result<Self> {
        if params.len() != tag.arity() {
            return Err(Error::Arity {
                tag,
                expected: tag.arity(),
                got: params.len(),
            });
        }
        let mut stored = [0.0; 3];
        stored[..params.len()].copy_from_slice(params);
        Ok(Self {
            tag,
            params: stored,
        })
    }

    /// Shorthand for parameter-free gates.
    pub fn fixed(tag: GateTag) -> Result<Self> {
        Self::new(tag, &[])
    }

    pub fn tag(&self) -> GateTag {
        self.tag
    }

    pub fn params(&self) -> &[f64] {
        &self.params[..self.tag.arity()]
    }

    /// The 2×2 matrix acting on the target qubit. For controlled gates this is
    /// the block applied in the control-|1⟩ subspace.
    pub fn target_matrix(&self) -> Mat2 {
        use GateTag::*;
        let p = self.params;
        match self.tag {
            H => {
                let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
                [[h, h], [h, -h]]
            }
            X | CX => [[ZERO, ONE], [ONE, ZERO]],
            Y | CY => [[ZERO, -I], [I, ZERO]],
            Z | CZ => [[ONE, ZERO], [ZERO, -ONE]],
            RX | CRX => {
                let (s, c) = (p[0] / 2.0).sin_cos();
                let c = Complex64::new(c, 0.0);
                let mis = Complex64::new(0.0, -s);
                [[c, mis], [mis, c]]
            }
            RY | CRY => {
                let (s, c) = (p[0] / 2.0).sin_cos();
                [
                    [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
                    [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
                ]
            }
            RZ | CRZ => [
                [Complex64::from_polar(1.0, -p[0] / 2.0), ZERO],
                [ZERO, Complex64::from_polar(1.0, p[0] / 2.0)],
            ],
            U1 => [[ONE, ZERO], [ZERO, Complex64::from_polar(1.0, p[0])]],
            U2 => {
                let (phi, lam) = (p[0], p[1]);
                let r = FRAC_1_SQRT_2;
                [
                    [Complex64::new(r, 0.0), -Complex64::from_polar(r, lam)],
                    [
                        Complex64::from_polar(r, phi),
                        Complex64::from_polar(r, phi + lam),
                    ],
                ]
            }
            U3 => {
                let (theta, phi, lam) = (p[0], p[1], p[2]);
                let (s, c) = (theta / 2.0).sin_cos();
                [
                    [Complex64::new(c, 0.0), -Complex64::from_polar(s, lam)],
                    [
                        Complex64::from_polar(s, phi),
                        Complex64::from_polar(c, phi + lam),
                    ],
                ]
            }
        }
    }
}

/// A square unitary, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Unitary {
    dim: usize,
    entries: Vec<Complex64>,
}

impl Unitary {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.dim + col]
    }

    /// `max |(G†G − I)_{ij}|`.
    pub fn unitarity_error(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let mut acc = ZERO;
                for k in 0..n {
                    acc += self.get(k, i).conj() * self.get(k, j);
                }
                if i == j {
                    acc -= ONE;
                }
                worst = worst.max(acc.norm());
            }
        }
        worst
    }
}

/// Full matrix of a gate: 2×2 for single-qubit gates, 4×4 for controlled gates
/// with row/column index `2·control + target`.
pub fn gate_matrix(kind: &GateKind) -> Unitary {
    let m = kind.target_matrix();
    if !kind.tag().is_controlled() {
        return Unitary {
            dim: 2,
            entries: vec![m[0][0], m[0][1], m[1][0], m[1][1]],
        };
    }
    let mut entries = vec![ZERO; 16];
    entries[0] = ONE;
    entries[5] = ONE;
    for r in 0..2 {
        for c in 0..2 {
            entries[(2 + r) * 4 + (2 + c)] = m[r][c];
        }
    }
    Unitary { dim: 4, entries }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateApplication {
    pub kind: GateKind,
    pub target: usize,
    pub control: Option<usize>,
}

impl GateApplication {
    pub fn single(kind: GateKind, target: usize) -> Result<Self> {
        Self::new(kind, target, None)
    }

    pub fn controlled(kind: GateKind, control: usize, target: usize) -> Result<Self> {
        Self::new(kind, target, Some(control))
    }

    pub fn new(kind: GateKind, target: usize, control: Option<usize>) -> Result<Self> {
        let tag = kind.tag();
        if tag.is_controlled() != control.is_some() {
            return Err(Error::ControlMismatch {
                tag,
                controlled: tag.is_controlled(),
            });
        }
        if control == Some(target) {
            return Err(Error::IndexCollision(target));
        }
        Ok(Self {
            kind,
            target,
            control,
        })
    }

    pub(crate) fn check_indices(&self, n_qubits: usize) -> Result<()> {
        for index in std::iter::once(self.target).chain(self.control) {
            if index >= n_qubits {
                return Err(Error::QubitIndex { index, n_qubits });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// `|0…0⟩` on `n_qubits` qubits.
    pub fn new(n_qubits: usize) -> Result<Self> {
        if !(1..=MAX_QUBITS).contains(&n_qubits) {
            return Err(Error::QubitCount(n_qubits));
        }
        let mut amplitudes = vec![ZERO; 1 << n_qubits];
        amplitudes[0] = ONE;
        Ok(Self {
            n_qubits,
            amplitudes,
        })
    }

    /// Builds a state from raw amplitudes, normalizing them.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if !len.is_power_of_two() || len < 2 {
            return Err(Error::InvalidArgument(format!(
                "amplitude count {len} is not a power of two"
            )));
        }
        let n_qubits = len.trailing_zeros() as usize;
        if n_qubits > MAX_QUBITS {
            return Err(Error::QubitCount(n_qubits));
        }
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidArgument("amplitudes have zero norm".into()));
        }
        Ok(Self {
            n_qubits,
            amplitudes: amplitudes.into_iter().map(|a| a / norm).collect(),
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// In-place gate application.
    pub fn apply(&mut self, app: &GateApplication) -> Result<()> {
        app.check_indices(self.n_qubits)?;
        let m = app.kind.target_matrix();
        let control_mask = app.control.map_or(0, |c| 1usize << c);
        apply_pairs(&mut self.amplitudes, app.target, &m, control_mask);
        Ok(())
    }

    /// Applies a raw 2×2 matrix to one qubit. Used for basis changes.
    pub(crate) fn apply_matrix(&mut self, target: usize, m: &Mat2) {
        apply_pairs(&mut self.amplitudes, target, m, 0);
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn expectation(&self, basis: Pauli, qubit: usize) -> Result<f64> {
        if qubit >= self.n_qubits {
            return Err(Error::QubitIndex {
                index: qubit,
                n_qubits: self.n_qubits,
            });
        }
        let bit = 1usize << qubit;
        let amps = &self.amplitudes;
        let value = match basis {
            Pauli::Z => amps
                .iter()
                .enumerate()
                .map(|(i, a)| if i & bit == 0 { a.norm_sqr() } else { -a.norm_sqr() })
                .sum(),
            // ⟨X⟩ = Σ 2·Re(ā₀a₁), ⟨Y⟩ = Σ 2·Im(ā₀a₁) over pairs differing in `qubit`
            Pauli::X | Pauli::Y => {
                let mut acc = 0.0;
                for i in (0..amps.len()).filter(|i| i & bit == 0) {
                    let z = amps[i].conj() * amps[i | bit];
                    acc += if basis == Pauli::X { z.re } else { z.im };
                }
                2.0 * acc
            }
        };
        Ok(value.clamp(-1.0, 1.0))
    }

    /// Multinomial sampling of computational-basis outcomes with a seeded
    /// ChaCha8 stream (one uniform draw per shot, inverse-CDF lookup).
    pub fn sample(&self, shots: u64, seed: u64) -> Result<ShotCounts> {
        if shots == 0 {
            return Err(Error::ZeroShots);
        }
        let probs = self.probabilities();
        let mut cdf = Vec::with_capacity(probs.len());
        let mut running = 0.0;
        for p in &probs {
            running += p;
            cdf.push(running);
        }
        let last_nonzero = probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut counts = BTreeMap::new();
        for _ in 0..shots {
            let u: f64 = rng.random::<f64>() * running;
            let idx = cdf.partition_point(|&c| c <= u).min(last_nonzero);
            *counts.entry(idx).or_insert(0u64) += 1;
        }
        Ok(ShotCounts { shots, counts })
    }
}

fn apply_pairs(amps: &mut [Complex64], target: usize, m: &Mat2, control_mask: usize) {
    let stride = 1usize << target;
    for base in (0..amps.len()).step_by(stride << 1) {
        for i in base..base + stride {
            if i & control_mask != control_mask {
                continue;
            }
            let j = i | stride;
            let (a0, a1) = (amps[i], amps[j]);
            amps[i] = m[0][0] * a0 + m[0][1] * a1;
            amps[j] = m[1][0] * a0 + m[1][1] * a1;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShotCounts {
    pub shots: u64,
    pub counts: BTreeMap<usize, u64>,
}

impl ShotCounts {
    pub fn count(&self, index: usize) -> u64 {
        self.counts.get(&index).copied().unwrap_or(0)
    }

    /// Most frequent basis index; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = (0usize, 0u64);
        for (&idx, &n) in &self.counts {
            if n > best.1 {
                best = (idx, n);
            }
        }
        best.0
    }
}

pub fn new_state(n_qubits: usize) -> Result<StateVector> {
    StateVector::new(n_qubits)
}

pub fn apply_gate(state: &StateVector, app: &GateApplication) -> Result<StateVector> {
    let mut out = state.clone();
    out.apply(app)?;
    Ok(out)
}

pub fn probabilities(state: &StateVector) -> Vec<f64> {
    state.probabilities()
}

pub fn sample_shots(state: &StateVector, shots: u64, seed: u64) -> Result<ShotCounts> {
    state.sample(shots, seed)
}

pub fn expectation_pauli(state: &StateVector, basis: Pauli, qubit: usize) -> Result<f64> {
    state.expectation(basis, qubit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    fn gate(tag: GateTag, params: &[f64]) -> GateKind {
        GateKind::new(tag, params).unwrap()
    }

    fn on(tag: GateTag, params: &[f64], target: usize) -> GateApplication {
        GateApplication::single(gate(tag, params), target).unwrap()
    }

    #[test]
    fn new_state_is_all_zero_ket() {
        let s = new_state(1).unwrap();
        assert_eq!(s.amplitudes(), &[ONE, ZERO]);
        let s = new_state(3).unwrap();
        assert_eq!(s.amplitudes().len(), 8);
        assert_eq!(s.amplitudes()[0], ONE);
        assert!(s.amplitudes()[1..].iter().all(|a| *a == ZERO));
    }

    #[test]
    fn new_state_rejects_out_of_range() {
        let err = new_state(9).unwrap_err();
        assert!(err.to_string().contains("qubit count out of range"));
        assert!(new_state(0).is_err());
    }

    #[test]
    fn hadamard_matrix() {
        let m = gate_matrix(&gate(GateTag::H, &[]));
        let r = FRAC_1_SQRT_2;
        assert_eq!(m.dim(), 2);
        assert!(close(m.get(0, 0), c(r, 0.0), 1e-15));
        assert!(close(m.get(0, 1), c(r, 0.0), 1e-15));
        assert!(close(m.get(1, 0), c(r, 0.0), 1e-15));
        assert!(close(m.get(1, 1), c(-r, 0.0), 1e-15));
    }

    #[test]
    fn u1_pi_is_z() {
        let u1 = gate_matrix(&gate(GateTag::U1, &[PI]));
        let z = gate_matrix(&gate(GateTag::Z, &[]));
        for r in 0..2 {
            for col in 0..2 {
                assert!(close(u1.get(r, col), z.get(r, col), 1e-15));
            }
        }
    }

    #[test]
    fn wrong_arity_rejected() {
        assert!(matches!(
            GateKind::new(GateTag::U3, &[0.1]),
            Err(Error::Arity { expected: 3, got: 1, .. })
        ));
        assert!(GateKind::new(GateTag::H, &[0.1]).is_err());
    }

    #[test]
    fn controlled_matrix_layout() {
        let m = gate_matrix(&gate(GateTag::CX, &[]));
        assert_eq!(m.dim(), 4);
        assert_eq!(m.get(0, 0), ONE);
        assert_eq!(m.get(1, 1), ONE);
        assert_eq!(m.get(2, 3), ONE);
        assert_eq!(m.get(3, 2), ONE);
        assert_eq!(m.get(2, 2), ZERO);
    }

    #[test]
    fn ry_half_pi_makes_plus_state() {
        let s = apply_gate(&new_state(1).unwrap(), &on(GateTag::RY, &[FRAC_PI_2], 0)).unwrap();
        let r = FRAC_1_SQRT_2;
        assert!(close(s.amplitudes()[0], c(r, 0.0), 1e-15));
        assert!(close(s.amplitudes()[1], c(r, 0.0), 1e-15));
    }

    #[test]
    fn rx_half_pi_on_zero() {
        let s = apply_gate(&new_state(1).unwrap(), &on(GateTag::RX, &[FRAC_PI_2], 0)).unwrap();
        let r = FRAC_1_SQRT_2;
        assert!(close(s.amplitudes()[0], c(r, 0.0), 1e-15));
        assert!(close(s.amplitudes()[1], c(0.0, -r), 1e-15));
    }

    #[test]
    fn cz_flips_phase_of_11() {
        let mut s = new_state(2).unwrap();
        s.apply(&on(GateTag::X, &[], 0)).unwrap();
        s.apply(&on(GateTag::X, &[], 1)).unwrap();
        let cz = GateApplication::controlled(gate(GateTag::CZ, &[]), 0, 1).unwrap();
        let out = apply_gate(&s, &cz).unwrap();
        assert!(close(out.amplitudes()[3], -ONE, 1e-15));
    }

    #[test]
    fn cx_with_inactive_control_is_identity() {
        let s = new_state(2).unwrap();
        let cx = GateApplication::controlled(gate(GateTag::CX, &[]), 0, 1).unwrap();
        assert_eq!(apply_gate(&s, &cx).unwrap(), s);
    }

    #[test]
    fn application_errors() {
        assert!(matches!(
            GateApplication::controlled(gate(GateTag::CZ, &[]), 1, 1),
            Err(Error::IndexCollision(1))
        ));
        assert!(matches!(
            GateApplication::single(gate(GateTag::CZ, &[]), 0),
            Err(Error::ControlMismatch { .. })
        ));
        assert!(GateApplication::controlled(gate(GateTag::H, &[]), 0, 1).is_err());
        let s = new_state(2).unwrap();
        assert!(matches!(
            apply_gate(&s, &on(GateTag::H, &[], 2)),
            Err(Error::QubitIndex { index: 2, n_qubits: 2 })
        ));
        let cx = GateApplication::controlled(gate(GateTag::CX, &[]), 5, 0).unwrap();
        assert!(apply_gate(&s, &cx).is_err());
    }

    #[test]
    fn probability_examples() {
        assert_eq!(probabilities(&new_state(1).unwrap()), vec![1.0, 0.0]);
        let h = apply_gate(&new_state(1).unwrap(), &on(GateTag::H, &[], 0)).unwrap();
        for p in probabilities(&h) {
            assert!((p - 0.5).abs() < 1e-15);
        }
        let mut hh = new_state(2).unwrap();
        hh.apply(&on(GateTag::H, &[], 0)).unwrap();
        hh.apply(&on(GateTag::H, &[], 1)).unwrap();
        for p in probabilities(&hh) {
            assert!((p - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn shots_on_basis_state_are_deterministic() {
        let counts = sample_shots(&new_state(1).unwrap(), 1000, 3).unwrap();
        assert_eq!(counts.count(0), 1000);
        assert_eq!(counts.counts.len(), 1);
        assert!(matches!(sample_shots(&new_state(1).unwrap(), 0, 3), Err(Error::ZeroShots)));
    }

    #[test]
    fn shots_on_plus_state_within_six_sigma() {
        let h = apply_gate(&new_state(1).unwrap(), &on(GateTag::H, &[], 0)).unwrap();
        let counts = sample_shots(&h, 1000, 11).unwrap();
        assert!((400..=600).contains(&counts.count(0)), "{counts:?}");
        assert_eq!(counts.count(0) + counts.count(1), 1000);
        assert_eq!(sample_shots(&h, 1000, 11).unwrap(), counts);
    }

    #[test]
    fn argmax_breaks_ties_low() {
        let counts = ShotCounts {
            shots: 4,
            counts: BTreeMap::from([(1, 2), (3, 2)]),
        };
        assert_eq!(counts.argmax(), 1);
    }

    #[test]
    fn pauli_expectations() {
        let zero = new_state(1).unwrap();
        assert_eq!(expectation_pauli(&zero, Pauli::Y, 0).unwrap(), 0.0);
        let rx = apply_gate(&zero, &on(GateTag::RX, &[FRAC_PI_2], 0)).unwrap();
        assert!((expectation_pauli(&rx, Pauli::Y, 0).unwrap() + 1.0).abs() < 1e-12);
        for theta in [0.0, FRAC_PI_2, PI] {
            let s = apply_gate(&zero, &on(GateTag::RY, &[theta], 0)).unwrap();
            let z = expectation_pauli(&s, Pauli::Z, 0).unwrap();
            assert!((z - theta.cos()).abs() < 1e-12);
        }
        assert!(expectation_pauli(&zero, Pauli::X, 1).is_err());
    }

    #[test]
    fn sampling_matches_probabilities_within_five_sigma() {
        let mut s = new_state(3).unwrap();
        s.apply(&on(GateTag::RY, &[1.1], 0)).unwrap();
        s.apply(&on(GateTag::H, &[], 1)).unwrap();
        s.apply(&GateApplication::controlled(gate(GateTag::CRX, &[2.0]), 1, 2).unwrap())
            .unwrap();
        let shots = 100_000u64;
        let counts = s.sample(shots, 2024).unwrap();
        for (i, p) in s.probabilities().into_iter().enumerate() {
            let sigma = (shots as f64 * p * (1.0 - p)).sqrt();
            let diff = (counts.count(i) as f64 - shots as f64 * p).abs();
            assert!(diff <= 5.0 * sigma + 1e-9, "index {i}: diff {diff} sigma {sigma}");
        }
    }

    fn random_state(n: usize, seed: u64) -> StateVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let amps = (0..1 << n)
            .map(|_| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        StateVector::from_amplitudes(amps).unwrap()
    }

    #[test]
    fn involutions() {
        let s = random_state(3, 5);
        for app in [
            on(GateTag::H, &[], 1),
            on(GateTag::X, &[], 2),
            GateApplication::controlled(gate(GateTag::CZ, &[]), 2, 0).unwrap(),
        ] {
            let twice = apply_gate(&apply_gate(&s, &app).unwrap(), &app).unwrap();
            for (a, b) in twice.amplitudes().iter().zip(s.amplitudes()) {
                assert!(close(*a, *b, 1e-12));
            }
        }
    }

    fn arb_gate() -> impl Strategy<Value = GateKind> {
        (
            prop::sample::select(GateTag::ALL.to_vec()),
            prop::array::uniform3(-10.0f64..10.0),
        )
            .prop_map(|(tag, p)| GateKind::new(tag, &p[..tag.arity()]).unwrap())
    }

    proptest! {
        #[test]
        fn every_gate_is_unitary(kind in arb_gate()) {
            prop_assert!(gate_matrix(&kind).unitarity_error() <= 1e-12);
        }

        #[test]
        fn gates_preserve_norm(kind in arb_gate(), seed in any::<u64>(), t in 0usize..3, dc in 1usize..3) {
            let s = random_state(3, seed);
            let control = kind.tag().is_controlled().then_some((t + dc) % 3);
            let app = GateApplication::new(kind, t, control).unwrap();
            let out = apply_gate(&s, &app).unwrap();
            prop_assert!((out.norm_sqr() - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn matches_kronecker_oracle(seed in any::<u64>(), n in 1usize..=3, len in 0usize..=10) {
            let circuit = oracle::random_circuit(n, len, seed);
            let mut s = new_state(n).unwrap();
            for app in &circuit {
                s.apply(app).unwrap();
            }
            let expected = oracle::kron_simulate(n, &circuit);
            for (a, b) in s.amplitudes().iter().zip(&expected) {
                prop_assert!((a - b).norm() <= 1e-10);
            }
        }
    }
}
