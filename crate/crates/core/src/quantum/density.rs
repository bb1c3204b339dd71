use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::circuit::Circuit;
use super::statevector::{apply_block, conj, gate_block, wire_mask, StateVector};
use crate::error::{Error, Result};

/// Largest register the density-matrix backend accepts.
pub const MAX_DENSITY_QUBITS: usize = 10;

/// Per-gate depolarizing rates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    pub r_1q: f64,
    pub r_2q: f64,
}

impl NoiseModel {
    /// Single- and two-qubit rates of the trapped-ion noisy simulator used
    /// for the reference inference runs.
    pub const FORTE1: NoiseModel = NoiseModel {
        r_1q: 2.67e-4,
        r_2q: 4.94e-3,
    };

    pub fn new(r_1q: f64, r_2q: f64) -> Result<Self> {
        let m = Self { r_1q, r_2q };
        m.validate()?;
        Ok(m)
    }

    pub fn ideal() -> Self {
        Self { r_1q: 0.0, r_2q: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, r) in [("r_1q", self.r_1q), ("r_2q", self.r_2q)] {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::Config(format!("{name} = {r} outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// `1 − (1−r_1q)^G1 (1−r_2q)^G2`: the largest shift any single-wire
    /// Z expectation may show for a circuit with these gate counts.
    pub fn deviation_bound(&self, single_qubit_gates: usize, two_qubit_gates: usize) -> f64 {
        1.0 - (1.0 - self.r_1q).powi(single_qubit_gates as i32) * (1.0 - self.r_2q).powi(two_qubit_gates as i32)
    }
}

/// Mixed state stored row-major. Entry `(r, c)` lives at `r·2^n + c`, so
/// the matrix can be treated as a vector over `2n` qubits: row wires
/// `0..n`, column wires `n..2n`.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    entries: Vec<Complex64>,
}

impl DensityMatrix {
    /// |0…0⟩⟨0…0|.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        Self::check_capacity(n_qubits)?;
        let dim = 1usize << n_qubits;
        let mut entries = vec![Complex64::new(0.0, 0.0); dim * dim];
        entries[0] = Complex64::new(1.0, 0.0);
        Ok(Self { n_qubits, entries })
    }

    pub fn from_pure(state: &StateVector) -> Result<Self> {
        let n = state.n_qubits();
        Self::check_capacity(n)?;
        let a = state.amplitudes();
        let entries = a.iter().flat_map(|r| a.iter().map(move |c| r * c.conj())).collect();
        Ok(Self { n_qubits: n, entries })
    }

    fn check_capacity(n_qubits: usize) -> Result<()> {
        if n_qubits == 0 || n_qubits > MAX_DENSITY_QUBITS {
            return Err(Error::Capacity(format!(
                "density matrix supports 1..={MAX_DENSITY_QUBITS} qubits, requested {n_qubits}"
            )));
        }
        Ok(())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.dim() + col]
    }

    /// `ρ ← U ρ U†` for one gate.
    pub fn apply_gate(&mut self, gate: &super::Gate, params: &[f64]) {
        let m = gate_block(gate, params);
        let total = 2 * self.n_qubits;
        apply_block(&mut self.entries, total, gate, 0, &m);
        apply_block(&mut self.entries, total, gate, self.n_qubits, &conj(&m));
    }

    /// `ρ ← (1−p)ρ + p·(I/2 ⊗ tr_q ρ)` on `wire`.
    pub fn depolarize_1q(&mut self, wire: usize, p: f64) {
        if p == 0.0 {
            return;
        }
        let total = 2 * self.n_qubits;
        let rm = wire_mask(total, wire);
        let cm = wire_mask(total, wire + self.n_qubits);
        let both = rm | cm;
        for i in 0..self.entries.len() {
            if i & both != 0 {
                continue;
            }
            // i has row bit 0 and column bit 0 on `wire`
            let (e00, e01, e10, e11) = (i, i | cm, i | rm, i | both);
            let mixed = (self.entries[e00] + self.entries[e11]) * (p / 2.0);
            self.entries[e00] = self.entries[e00] * (1.0 - p) + mixed;
            self.entries[e11] = self.entries[e11] * (1.0 - p) + mixed;
            self.entries[e01] *= 1.0 - p;
            self.entries[e10] *= 1.0 - p;
        }
    }

    /// `ρ ← (1−p)ρ + p·(I/4 ⊗ tr_{ab} ρ)` on wires `a`, `b`.
    pub fn depolarize_2q(&mut self, a: usize, b: usize, p: f64) {
        if p == 0.0 {
            return;
        }
        let n = self.n_qubits;
        let total = 2 * n;
        let masks = [
            wire_mask(total, a),
            wire_mask(total, b),
            wire_mask(total, a + n),
            wire_mask(total, b + n),
        ];
        let all = masks.iter().fold(0, |acc, m| acc | m);
        let (ra, rb, ca, cb) = (masks[0], masks[1], masks[2], masks[3]);
        for i in 0..self.entries.len() {
            if i & all != 0 {
                continue;
            }
            // the 16 entries of the 4x4 block on (a, b)
            let mut block = [0usize; 16];
            for (k, slot) in block.iter_mut().enumerate() {
                let (r, c) = (k >> 2, k & 3);
                let mut idx = i;
                if r & 2 != 0 {
                    idx |= ra;
                }
                if r & 1 != 0 {
                    idx |= rb;
                }
                if c & 2 != 0 {
                    idx |= ca;
                }
                if c & 1 != 0 {
                    idx |= cb;
                }
                *slot = idx;
            }
            let trace: Complex64 = (0..4).map(|d| self.entries[block[d * 5]]).sum();
            let mixed = trace * (p / 4.0);
            for (k, &idx) in block.iter().enumerate() {
                self.entries[idx] *= 1.0 - p;
                if k % 5 == 0 {
                    self.entries[idx] += mixed;
                }
            }
        }
    }

    /// `tr(Z_wire ρ)`.
    pub fn expect_z(&self, wire: usize) -> f64 {
        let dim = self.dim();
        let mask = wire_mask(self.n_qubits, wire);
        (0..dim)
            .map(|b| {
                let d = self.entries[b * dim + b].re;
                if b & mask == 0 {
                    d
                } else {
                    -d
                }
            })
            .sum()
    }

    pub fn trace(&self) -> Complex64 {
        let dim = self.dim();
        (0..dim).map(|b| self.entries[b * dim + b]).sum()
    }

    /// Largest `|ρ_rc − conj(ρ_cr)|`.
    pub fn hermiticity_error(&self) -> f64 {
        let dim = self.dim();
        let mut worst: f64 = 0.0;
        for r in 0..dim {
            for c in r..dim {
                let d = (self.entries[r * dim + c] - self.entries[c * dim + r].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let dim = self.dim();
        // symmetrize so the Hermitian solver sees exact Hermitian input
        let m = DMatrix::from_fn(dim, dim, |r, c| {
            (self.entries[r * dim + c] + self.entries[c * dim + r].conj()) * 0.5
        });
        m.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Checks trace 1 (±1e-10), Hermiticity (≤1e-12) and positivity
    /// (min eigenvalue ≥ −1e-9).
    pub fn check_invariants(&self) -> Result<()> {
        let tr = self.trace();
        if (tr.re - 1.0).abs() > 1e-10 || tr.im.abs() > 1e-10 {
            return Err(Error::State(format!("density matrix trace {tr}")));
        }
        let h = self.hermiticity_error();
        if h > 1e-12 {
            return Err(Error::State(format!("density matrix hermiticity error {h:e}")));
        }
        let ev = self.min_eigenvalue();
        if ev < -1e-9 {
            return Err(Error::State(format!("density matrix eigenvalue {ev:e}")));
        }
        Ok(())
    }
}

/// Runs `circuit` on |0…0⟩⟨0…0| with a depolarizing channel after every
/// gate, on that gate's wires.
pub fn simulate_noisy(circuit: &Circuit, params: &[f64], noise: &NoiseModel) -> Result<DensityMatrix> {
    simulate_noisy_observed(circuit, params, noise, |_, _| Ok(()))
}

/// As [`simulate_noisy`], calling `observe(gate_index, ρ)` after each gate
/// and its channel.
pub fn simulate_noisy_observed<F>(
    circuit: &Circuit,
    params: &[f64],
    noise: &NoiseModel,
    mut observe: F,
) -> Result<DensityMatrix>
where
    F: FnMut(usize, &DensityMatrix) -> Result<()>,
{
    noise.validate()?;
    circuit.check_params(params)?;
    let mut rho = DensityMatrix::zero(circuit.n_qubits())?;
    for (k, g) in circuit.gates().iter().enumerate() {
        rho.apply_gate(g, params);
        match g.wires.as_slice() {
            [w] => rho.depolarize_1q(*w, noise.r_1q),
            [a, b] => rho.depolarize_2q(*a, *b, noise.r_2q),
            _ => unreachable!("validated arity"),
        }
        observe(k, &rho)?;
    }
    Ok(rho)
}

/// `⟨Z_w⟩` on every wire under noise.
pub fn noisy_expectations(circuit: &Circuit, params: &[f64], noise: &NoiseModel) -> Result<Vec<f64>> {
    let rho = simulate_noisy(circuit, params, noise)?;
    Ok((0..circuit.n_qubits()).map(|w| rho.expect_z(w)).collect())
}
