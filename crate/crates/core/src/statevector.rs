//! Dense statevector simulation for circuits of RY rotations and CZ
//! entanglers.
//!
//! Basis indices are little-endian: qubit `q` is bit `q` of the index, so
//! `|01⟩` written with qubit 0 rightmost is index 1. Gates are applied in
//! place with stride-based pair indexing, O(2^n) per gate.

use num_complex::Complex64;

use crate::{Error, Result};

/// A gate in a parameterised circuit. Rotation angles are looked up by slot
/// in the parameter vector passed to [`run_circuit`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateOp {
    RotationY { target: usize, slot: usize },
    ControlledZ { control: usize, target: usize },
}

impl GateOp {
    pub fn ry(target: usize, slot: usize) -> Self {
        GateOp::RotationY { target, slot }
    }

    pub fn cz(control: usize, target: usize) -> Self {
        GateOp::ControlledZ { control, target }
    }

    pub fn slot(&self) -> Option<usize> {
        match *self {
            GateOp::RotationY { slot, .. } => Some(slot),
            GateOp::ControlledZ { .. } => None,
        }
    }

    /// Checks qubit indices against a register of `n_qubits`.
    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        match *self {
            GateOp::RotationY { target, .. } => check_qubit(target, n_qubits),
            GateOp::ControlledZ { control, target } => {
                check_qubit(control, n_qubits)?;
                check_qubit(target, n_qubits)?;
                if control == target {
                    return Err(Error::Bounds {
                        detail: format!("controlled-Z on a single qubit ({control})"),
                    });
                }
                Ok(())
            }
        }
    }
}

fn check_qubit(qubit: usize, n_qubits: usize) -> Result<()> {
    if qubit >= n_qubits {
        Err(Error::Bounds {
            detail: format!("qubit {qubit} on a {n_qubits}-qubit register"),
        })
    } else {
        Ok(())
    }
}

/// Pure state of `n_qubits` qubits as 2^n complex amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl QuantumState {
    /// Largest register this simulator will allocate.
    pub const MAX_QUBITS: usize = 24;

    /// `|0…0⟩`.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        Self::basis(n_qubits, 0)
    }

    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > Self::MAX_QUBITS {
            return Err(Error::Validation(format!(
                "register size must be in 1..={}, got {n_qubits}",
                Self::MAX_QUBITS
            )));
        }
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(Error::Bounds {
                detail: format!("basis index {index} on a {n_qubits}-qubit register"),
            });
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); dim];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        Ok(Self {
            n_qubits,
            amplitudes,
        })
    }

    /// Wraps raw amplitudes. The length must be a power of two; normalisation
    /// is the caller's responsibility.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let dim = amplitudes.len();
        if dim < 2 || !dim.is_power_of_two() {
            return Err(Error::Validation(format!(
                "amplitude count {dim} is not a power of two >= 2"
            )));
        }
        let n_qubits = dim.trailing_zeros() as usize;
        if n_qubits > Self::MAX_QUBITS {
            return Err(Error::Validation(format!("{n_qubits} qubits exceeds the simulator limit")));
        }
        Ok(Self {
            n_qubits,
            amplitudes,
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

    /// RY(θ) on `qubit`: each pair (|…0_q…⟩, |…1_q…⟩) is mapped by
    /// [[cos θ/2, −sin θ/2], [sin θ/2, cos θ/2]].
    pub fn apply_ry(&mut self, qubit: usize, theta: f64) -> Result<()> {
        check_qubit(qubit, self.n_qubits)?;
        let (s, c) = (0.5 * theta).sin_cos();
        let stride = 1usize << qubit;
        for block in self.amplitudes.chunks_exact_mut(stride << 1) {
            let (lo, hi) = block.split_at_mut(stride);
            for (a0, a1) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x0, x1) = (*a0, *a1);
                *a0 = x0 * c - x1 * s;
                *a1 = x0 * s + x1 * c;
            }
        }
        Ok(())
    }

    /// Re⟨self|RY_q(θ)|ket⟩, without forming the rotated state.
    pub fn ry_overlap(&self, ket: &QuantumState, qubit: usize, theta: f64) -> Result<f64> {
        check_qubit(qubit, self.n_qubits)?;
        if ket.n_qubits != self.n_qubits {
            return Err(Error::Bounds {
                detail: format!("overlap of {}- and {}-qubit states", self.n_qubits, ket.n_qubits),
            });
        }
        let (s, c) = (0.5 * theta).sin_cos();
        let stride = 1usize << qubit;
        let mut total = 0.0;
        for (bra, block) in self
            .amplitudes
            .chunks_exact(stride << 1)
            .zip(ket.amplitudes.chunks_exact(stride << 1))
        {
            let (b0, b1) = bra.split_at(stride);
            let (k0, k1) = block.split_at(stride);
            for i in 0..stride {
                let r0 = k0[i] * c - k1[i] * s;
                let r1 = k0[i] * s + k1[i] * c;
                total += (b0[i].conj() * r0).re + (b1[i].conj() * r1).re;
            }
        }
        Ok(total)
    }

    /// CZ between qubits `a` and `b`: negates every amplitude whose index has
    /// both bits set. Symmetric in its arguments.
    pub fn apply_cz(&mut self, a: usize, b: usize) -> Result<()> {
        GateOp::cz(a, b).validate(self.n_qubits)?;
        let mask = (1usize << a) | (1usize << b);
        for (index, amp) in self.amplitudes.iter_mut().enumerate() {
            if index & mask == mask {
                *amp = -*amp;
            }
        }
        Ok(())
    }

    /// Exact ⟨Z_q⟩ = Σ |amp|²·(±1), +1 where bit `q` is 0.
    pub fn expectation_z(&self, qubit: usize) -> Result<f64> {
        check_qubit(qubit, self.n_qubits)?;
        let stride = 1usize << qubit;
        let mut total = 0.0;
        for block in self.amplitudes.chunks_exact(stride << 1) {
            let (lo, hi) = block.split_at(stride);
            total += lo.iter().map(|a| a.norm_sqr()).sum::<f64>();
            total -= hi.iter().map(|a| a.norm_sqr()).sum::<f64>();
        }
        Ok(total)
    }

    /// ⟨Z_q⟩ for every qubit, in qubit order.
    pub fn expectations_z(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_qubits];
        for (index, amp) in self.amplitudes.iter().enumerate() {
            let p = amp.norm_sqr();
            for (q, z) in out.iter_mut().enumerate() {
                if index >> q & 1 == 0 {
                    *z += p;
                } else {
                    *z -= p;
                }
            }
        }
        out
    }

    /// Applies one gate, reading rotation angles from `params`.
    pub fn apply(&mut self, op: &GateOp, params: &[f64]) -> Result<()> {
        match *op {
            GateOp::RotationY { target, slot } => {
                let theta = *params.get(slot).ok_or(Error::ParameterBinding {
                    slot,
                    available: params.len(),
                })?;
                self.apply_ry(target, theta)
            }
            GateOp::ControlledZ { control, target } => self.apply_cz(control, target),
        }
    }

    /// Applies a gate sequence in order.
    pub fn apply_all(&mut self, ops: &[GateOp], params: &[f64]) -> Result<()> {
        ops.iter().try_for_each(|op| self.apply(op, params))
    }
}

/// Checks every gate against the register and the parameter vector without
/// touching a state.
pub fn validate_circuit(n_qubits: usize, ops: &[GateOp], n_params: usize) -> Result<()> {
    for op in ops {
        op.validate(n_qubits)?;
        if let Some(slot) = op.slot() {
            if slot >= n_params {
                return Err(Error::ParameterBinding {
                    slot,
                    available: n_params,
                });
            }
        }
    }
    Ok(())
}

/// Runs `ops` from `|0…0⟩` with angles bound from `params`.
pub fn run_circuit(n_qubits: usize, ops: &[GateOp], params: &[f64]) -> Result<QuantumState> {
    validate_circuit(n_qubits, ops, params.len())?;
    let mut state = QuantumState::zero(n_qubits)?;
    state.apply_all(ops, params)?;
    Ok(state)
}
