//! Independent reference routines used only by tests.
//!
//! Nothing here shares a code path with the production kernels: circuits are
//! simulated by multiplying explicit `2^n × 2^n` matrices built from Kronecker
//! products, and derivatives are taken by central differences.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::qsim::{GateApplication, GateKind, GateTag, Mat2};

type Dense = Vec<Vec<Complex64>>;

fn identity(dim: usize) -> Dense {
    (0..dim)
        .map(|i| {
            (0..dim)
                .map(|j| Complex64::new(if i == j { 1.0 } else { 0.0 }, 0.0))
                .collect()
        })
        .collect()
}

fn from2(m: &Mat2) -> Dense {
    vec![vec![m[0][0], m[0][1]], vec![m[1][0], m[1][1]]]
}

pub fn kron(a: &Dense, b: &Dense) -> Dense {
    let (ra, rb) = (a.len(), b.len());
    let (ca, cb) = (a[0].len(), b[0].len());
    let mut out = vec![vec![Complex64::new(0.0, 0.0); ca * cb]; ra * rb];
    for i1 in 0..ra {
        for j1 in 0..ca {
            for i2 in 0..rb {
                for j2 in 0..cb {
                    out[i1 * rb + i2][j1 * cb + j2] = a[i1][j1] * b[i2][j2];
                }
            }
        }
    }
    out
}

fn add(a: &Dense, b: &Dense) -> Dense {
    a.iter()
        .zip(b)
        .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x + y).collect())
        .collect()
}

/// `factors[q]` acts on qubit `q`; qubit 0 is the least significant bit, so
/// it sits rightmost in the Kronecker chain.
fn expand(n: usize, factors: &[Dense]) -> Dense {
    let mut out = factors[n - 1].clone();
    for q in (0..n - 1).rev() {
        out = kron(&out, &factors[q]);
    }
    out
}

/// Full-register matrix of one gate application.
pub fn full_matrix(n: usize, app: &GateApplication) -> Dense {
    let target_block = from2(&app.kind.target_matrix());
    match app.control {
        None => {
            let mut factors = vec![identity(2); n];
            factors[app.target] = target_block;
            expand(n, &factors)
        }
        Some(c) => {
            let zero = Complex64::new(0.0, 0.0);
            let one = Complex64::new(1.0, 0.0);
            let p0 = vec![vec![one, zero], vec![zero, zero]];
            let p1 = vec![vec![zero, zero], vec![zero, one]];
            let mut idle = vec![identity(2); n];
            idle[c] = p0;
            let mut active = vec![identity(2); n];
            active[c] = p1;
            active[app.target] = target_block;
            add(&expand(n, &idle), &expand(n, &active))
        }
    }
}

pub fn matvec(m: &Dense, v: &[Complex64]) -> Vec<Complex64> {
    m.iter()
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

/// Amplitudes of `circuit` applied to `|0…0⟩`, via explicit matrix products.
pub fn kron_simulate(n: usize, circuit: &[GateApplication]) -> Vec<Complex64> {
    let mut v = vec![Complex64::new(0.0, 0.0); 1 << n];
    v[0] = Complex64::new(1.0, 0.0);
    for app in circuit {
        v = matvec(&full_matrix(n, app), &v);
    }
    v
}

/// `⟨ψ|P_q|ψ⟩` computed with a full-register Pauli matrix.
pub fn kron_expectation(n: usize, psi: &[Complex64], basis: crate::qsim::Pauli, qubit: usize) -> f64 {
    let tag = match basis {
        crate::qsim::Pauli::X => GateTag::X,
        crate::qsim::Pauli::Y => GateTag::Y,
        crate::qsim::Pauli::Z => GateTag::Z,
    };
    let app = GateApplication::single(GateKind::fixed(tag).unwrap(), qubit).unwrap();
    let p_psi = matvec(&full_matrix(n, &app), psi);
    psi.iter().zip(&p_psi).map(|(a, b)| a.conj() * b).sum::<Complex64>().re
}

/// Uniformly random gate sequence over the full gate set.
pub fn random_circuit(n: usize, len: usize, seed: u64) -> Vec<GateApplication> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tags: Vec<GateTag> = GateTag::ALL
        .into_iter()
        .filter(|t| n > 1 || !t.is_controlled())
        .collect();
    (0..len)
        .map(|_| {
            let tag = tags[rng.random_range(0..tags.len())];
            let params: Vec<f64> = (0..tag.arity())
                .map(|_| rng.random_range(-std::f64::consts::TAU..std::f64::consts::TAU))
                .collect();
            let kind = GateKind::new(tag, &params).unwrap();
            let target = rng.random_range(0..n);
            let control = tag
                .is_controlled()
                .then(|| (target + rng.random_range(1..n)) % n);
            GateApplication::new(kind, target, control).unwrap()
        })
        .collect()
}

/// Central difference `(f(x+h) − f(x−h)) / 2h` for every coordinate of `x`.
pub fn central_gradient<F>(x: &[f64], h: f64, mut f: F) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `|a − b| / max(1, |b|)`: relative error with the denominator floored at 1
/// so vanishing components are compared absolutely.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}
