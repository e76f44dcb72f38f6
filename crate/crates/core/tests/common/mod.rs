//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use num_complex::Complex64;
use rand::Rng;

use qtl_core::statevector::GateOp;

pub type Matrix = Vec<Vec<Complex64>>;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn identity(dim: usize) -> Matrix {
    (0..dim)
        .map(|i| (0..dim).map(|j| if i == j { c(1.0) } else { c(0.0) }).collect())
        .collect()
}

pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let (ra, rb) = (a.len(), b.len());
    let mut out = vec![vec![c(0.0); ra * rb]; ra * rb];
    for i in 0..ra {
        for j in 0..ra {
            for k in 0..rb {
                for l in 0..rb {
                    out[i * rb + k][j * rb + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

pub fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.len();
    let mut out = vec![vec![c(0.0); n]; n];
    for i in 0..n {
        for k in 0..n {
            if a[i][k] == c(0.0) {
                continue;
            }
            for j in 0..n {
                out[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    out
}

pub fn matvec(a: &Matrix, v: &[Complex64]) -> Vec<Complex64> {
    a.iter().map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum()).collect()
}

fn ry_2x2(theta: f64) -> Matrix {
    let (s, co) = (theta / 2.0).sin_cos();
    vec![vec![c(co), c(-s)], vec![c(s), c(co)]]
}

fn proj(bit: usize) -> Matrix {
    if bit == 0 {
        vec![vec![c(1.0), c(0.0)], vec![c(0.0), c(0.0)]]
    } else {
        vec![vec![c(0.0), c(0.0)], vec![c(0.0), c(1.0)]]
    }
}

fn pauli_z() -> Matrix {
    vec![vec![c(1.0), c(0.0)], vec![c(0.0), c(-1.0)]]
}

/// `⊗_{q = n-1 … 0} factors[q]`: qubit 0 is the least significant index bit.
pub fn tensor(factors: &[Matrix]) -> Matrix {
    let mut out = vec![vec![c(1.0)]];
    for f in factors.iter().rev() {
        out = kron(&out, f);
    }
    out
}

pub fn single(n: usize, q: usize, m: Matrix) -> Matrix {
    let factors: Vec<Matrix> = (0..n).map(|i| if i == q { m.clone() } else { identity(2) }).collect();
    tensor(&factors)
}

/// CZ = |0⟩⟨0|_a ⊗ I + |1⟩⟨1|_a ⊗ Z_b.
pub fn cz_dense(n: usize, a: usize, b: usize) -> Matrix {
    let mut off: Vec<Matrix> = (0..n).map(|_| identity(2)).collect();
    off[a] = proj(0);
    let mut on: Vec<Matrix> = (0..n).map(|_| identity(2)).collect();
    on[a] = proj(1);
    on[b] = pauli_z();
    let (x, y) = (tensor(&off), tensor(&on));
    x.iter()
        .zip(&y)
        .map(|(r, s)| r.iter().zip(s).map(|(p, q)| p + q).collect())
        .collect()
}

pub fn gate_dense(n: usize, op: &GateOp, params: &[f64]) -> Matrix {
    match *op {
        GateOp::RotationY { target, slot } => single(n, target, ry_2x2(params[slot])),
        GateOp::ControlledZ { control, target } => cz_dense(n, control, target),
    }
}

/// Full circuit unitary as a dense product.
pub fn circuit_unitary(n: usize, ops: &[GateOp], params: &[f64]) -> Matrix {
    let mut u = identity(1 << n);
    for op in ops {
        u = matmul(&gate_dense(n, op, params), &u);
    }
    u
}

/// Final state of the circuit on |0…0⟩ via the dense unitary.
pub fn oracle_state(n: usize, ops: &[GateOp], params: &[f64]) -> Vec<Complex64> {
    let mut zero = vec![c(0.0); 1 << n];
    zero[0] = c(1.0);
    matvec(&circuit_unitary(n, ops, params), &zero)
}

/// ⟨ψ|Z_q|ψ⟩ with the dense Z_q operator.
pub fn oracle_z(n: usize, q: usize, psi: &[Complex64]) -> f64 {
    let zq = single(n, q, pauli_z());
    let zpsi = matvec(&zq, psi);
    psi.iter().zip(&zpsi).map(|(a, b)| (a.conj() * b).re).sum()
}

/// Random RY/CZ circuit on `n` qubits with one slot per rotation.
pub fn random_circuit<R: Rng>(rng: &mut R, n: usize, n_gates: usize) -> (Vec<GateOp>, Vec<f64>) {
    let mut ops = Vec::with_capacity(n_gates);
    let mut params = Vec::new();
    for _ in 0..n_gates {
        if n >= 2 && rng.random_bool(0.4) {
            let a = rng.random_range(0..n);
            let mut b = rng.random_range(0..n - 1);
            if b >= a {
                b += 1;
            }
            ops.push(GateOp::cz(a, b));
        } else {
            ops.push(GateOp::ry(rng.random_range(0..n), params.len()));
            params.push(rng.random_range(-2.0 * std::f64::consts::PI..2.0 * std::f64::consts::PI));
        }
    }
    (ops, params)
}

/// AUC by exhaustive comparison, as exact counts over 2·P·N:
/// each positive/negative pair contributes 2 if the positive scores higher
/// and 1 on a tie.
pub fn pairwise_auc(scores: &[f64], positive: &[bool]) -> Option<(u64, u64)> {
    let pos: Vec<f64> = scores.iter().zip(positive).filter(|p| *p.1).map(|p| *p.0).collect();
    let neg: Vec<f64> = scores.iter().zip(positive).filter(|p| !*p.1).map(|p| *p.0).collect();
    if pos.is_empty() || neg.is_empty() {
        return None;
    }
    let mut num = 0;
    for p in &pos {
        for q in &neg {
            if p > q {
                num += 2;
            } else if p == q {
                num += 1;
            }
        }
    }
    Some((num, 2 * pos.len() as u64 * neg.len() as u64))
}

/// Central finite difference of `f` at `x` along coordinate `i`.
pub fn central_difference<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], i: usize, h: f64) -> f64 {
    let mut plus = x.to_vec();
    let mut minus = x.to_vec();
    plus[i] += h;
    minus[i] -= h;
    (f(&plus) - f(&minus)) / (2.0 * h)
}

/// Softmax cross-entropy written directly from its definition.
pub fn cross_entropy(logits: &[f64], label: usize) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    lse - logits[label]
}
