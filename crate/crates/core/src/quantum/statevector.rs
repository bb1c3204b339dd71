use num_complex::Complex64;

use super::circuit::{Circuit, Gate, GateKind};
use crate::error::{Error, Result};

pub type Matrix2 = [[Complex64; 2]; 2];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

pub fn rz_matrix(theta: f64) -> Matrix2 {
    let h = theta / 2.0;
    [
        [Complex64::from_polar(1.0, -h), ZERO],
        [ZERO, Complex64::from_polar(1.0, h)],
    ]
}

pub fn ry_matrix(theta: f64) -> Matrix2 {
    let (s, c) = (theta / 2.0).sin_cos();
    [
        [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
        [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
    ]
}

pub fn x_matrix() -> Matrix2 {
    [[ZERO, ONE], [ONE, ZERO]]
}

/// `d/dθ RZ(θ)`.
pub fn rz_derivative(theta: f64) -> Matrix2 {
    let h = theta / 2.0;
    let half_i = Complex64::new(0.0, 0.5);
    [
        [-half_i * Complex64::from_polar(1.0, -h), ZERO],
        [ZERO, half_i * Complex64::from_polar(1.0, h)],
    ]
}

/// `d/dθ RY(θ)`.
pub fn ry_derivative(theta: f64) -> Matrix2 {
    let (s, c) = (theta / 2.0).sin_cos();
    [
        [Complex64::new(-s / 2.0, 0.0), Complex64::new(-c / 2.0, 0.0)],
        [Complex64::new(c / 2.0, 0.0), Complex64::new(-s / 2.0, 0.0)],
    ]
}

pub fn adjoint(m: &Matrix2) -> Matrix2 {
    [[m[0][0].conj(), m[1][0].conj()], [m[0][1].conj(), m[1][1].conj()]]
}

pub fn conj(m: &Matrix2) -> Matrix2 {
    [[m[0][0].conj(), m[0][1].conj()], [m[1][0].conj(), m[1][1].conj()]]
}

/// Bit mask of `wire` in an index over `total` qubits, wire 0 being the
/// most significant bit.
#[inline]
pub(crate) fn wire_mask(total: usize, wire: usize) -> usize {
    1 << (total - 1 - wire)
}

/// Applies `m` to `wire` of an amplitude vector over `total` qubits.
pub(crate) fn apply_1q(amps: &mut [Complex64], total: usize, wire: usize, m: &Matrix2) {
    let mask = wire_mask(total, wire);
    for i in 0..amps.len() {
        if i & mask == 0 {
            let j = i | mask;
            let (a, b) = (amps[i], amps[j]);
            amps[i] = m[0][0] * a + m[0][1] * b;
            amps[j] = m[1][0] * a + m[1][1] * b;
        }
    }
}

/// Applies `m` to `target` on the subspace where `control` is |1⟩.
pub(crate) fn apply_controlled(amps: &mut [Complex64], total: usize, control: usize, target: usize, m: &Matrix2) {
    let cmask = wire_mask(total, control);
    let tmask = wire_mask(total, target);
    for i in 0..amps.len() {
        if i & cmask != 0 && i & tmask == 0 {
            let j = i | tmask;
            let (a, b) = (amps[i], amps[j]);
            amps[i] = m[0][0] * a + m[0][1] * b;
            amps[j] = m[1][0] * a + m[1][1] * b;
        }
    }
}

/// The 2×2 block a gate applies (to its target, under control for
/// two-qubit gates).
pub(crate) fn gate_block(gate: &Gate, params: &[f64]) -> Matrix2 {
    let theta = gate.angle(params);
    match gate.kind {
        GateKind::Rz => rz_matrix(theta),
        GateKind::Ry | GateKind::Cry => ry_matrix(theta),
        GateKind::Cnot => x_matrix(),
    }
}

pub(crate) fn apply_block(amps: &mut [Complex64], total: usize, gate: &Gate, offset: usize, m: &Matrix2) {
    match gate.kind {
        GateKind::Rz | GateKind::Ry => apply_1q(amps, total, gate.wires[0] + offset, m),
        GateKind::Cnot | GateKind::Cry => {
            apply_controlled(amps, total, gate.wires[0] + offset, gate.wires[1] + offset, m)
        }
    }
}

/// Pure state over `n_qubits` with 64-bit complex amplitudes.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// |0…0⟩.
    pub fn zero(n_qubits: usize) -> Self {
        let mut amps = vec![ZERO; 1 << n_qubits];
        amps[0] = ONE;
        Self { n_qubits, amps }
    }

    /// Computational basis state with the given label (wire 0 = MSB).
    pub fn basis(n_qubits: usize, index: usize) -> Self {
        let mut amps = vec![ZERO; 1 << n_qubits];
        amps[index] = ONE;
        Self { n_qubits, amps }
    }

    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        if !amps.len().is_power_of_two() || amps.len() < 2 {
            return Err(Error::Dimension(format!(
                "{} amplitudes is not a power of two >= 2",
                amps.len()
            )));
        }
        let n_qubits = amps.len().trailing_zeros() as usize;
        Ok(Self { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn apply_gate(&mut self, gate: &Gate, params: &[f64]) {
        let m = gate_block(gate, params);
        apply_block(&mut self.amps, self.n_qubits, gate, 0, &m);
    }

    /// Applies the inverse of `gate`.
    pub fn apply_gate_adjoint(&mut self, gate: &Gate, params: &[f64]) {
        let m = adjoint(&gate_block(gate, params));
        apply_block(&mut self.amps, self.n_qubits, gate, 0, &m);
    }

    /// `dU/dθ |self⟩` for a parameterized gate. For controlled rotations the
    /// control-|0⟩ subspace is zeroed since it does not depend on θ.
    pub(crate) fn apply_gate_derivative(&mut self, gate: &Gate, params: &[f64]) {
        let theta = gate.angle(params);
        match gate.kind {
            GateKind::Rz => apply_1q(&mut self.amps, self.n_qubits, gate.wires[0], &rz_derivative(theta)),
            GateKind::Ry => apply_1q(&mut self.amps, self.n_qubits, gate.wires[0], &ry_derivative(theta)),
            GateKind::Cry => {
                let cmask = wire_mask(self.n_qubits, gate.wires[0]);
                for (i, a) in self.amps.iter_mut().enumerate() {
                    if i & cmask == 0 {
                        *a = ZERO;
                    }
                }
                apply_controlled(
                    &mut self.amps,
                    self.n_qubits,
                    gate.wires[0],
                    gate.wires[1],
                    &ry_derivative(theta),
                );
            }
            GateKind::Cnot => self.amps.iter_mut().for_each(|a| *a = ZERO),
        }
    }

    pub fn apply_1q_matrix(&mut self, wire: usize, m: &Matrix2) {
        apply_1q(&mut self.amps, self.n_qubits, wire, m);
    }

    /// `⟨Z_wire⟩ = Σ_b (±1)|a_b|²`, + for bit 0.
    pub fn expect_z(&self, wire: usize) -> f64 {
        let mask = wire_mask(self.n_qubits, wire);
        self.amps
            .iter()
            .enumerate()
            .map(|(i, a)| if i & mask == 0 { a.norm_sqr() } else { -a.norm_sqr() })
            .sum()
    }

    /// In-place `Z_wire |self⟩`.
    pub(crate) fn apply_z(&mut self, wire: usize) {
        let mask = wire_mask(self.n_qubits, wire);
        for (i, a) in self.amps.iter_mut().enumerate() {
            if i & mask != 0 {
                *a = -*a;
            }
        }
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }
}

/// Runs `circuit` on |0…0⟩.
pub fn run(circuit: &Circuit, params: &[f64]) -> Result<StateVector> {
    circuit.check_params(params)?;
    let mut state = StateVector::zero(circuit.n_qubits());
    for g in circuit.gates() {
        state.apply_gate(g, params);
    }
    Ok(state)
}

/// `⟨Z_w⟩` on every wire after running `circuit`.
pub fn expectations(circuit: &Circuit, params: &[f64]) -> Result<Vec<f64>> {
    let state = run(circuit, params)?;
    Ok((0..circuit.n_qubits()).map(|w| state.expect_z(w)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::circuit::{build_ansatz, ParamRole};
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_3, PI};

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() < tol
    }

    #[test]
    fn ry_pi_flips_zero_to_one() {
        let mut s = StateVector::zero(1);
        s.apply_gate(&Gate::ry(0, 0, ParamRole::Trainable), &[PI]);
        assert!(close(s.amplitudes()[0], ZERO, 1e-12));
        assert!(close(s.amplitudes()[1], ONE, 1e-12));
    }

    #[test]
    fn rz_on_zero_only_changes_phase() {
        let mut s = StateVector::zero(1);
        s.apply_gate(&Gate::rz(0, 0, ParamRole::Trainable), &[1.234]);
        assert!((s.expect_z(0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn cnot_on_10_gives_11() {
        let mut s = StateVector::basis(2, 0b10);
        s.apply_gate(&Gate::cnot(0, 1), &[]);
        assert_eq!(s, StateVector::basis(2, 0b11));
        // control is wire 0 = MSB; |01⟩ is untouched
        let mut s = StateVector::basis(2, 0b01);
        s.apply_gate(&Gate::cnot(0, 1), &[]);
        assert_eq!(s, StateVector::basis(2, 0b01));
    }

    #[test]
    fn expect_z_of_basis_and_ry() {
        assert_eq!(StateVector::zero(1).expect_z(0), 1.0);
        assert_eq!(StateVector::basis(1, 1).expect_z(0), -1.0);
        for theta in [0.0, FRAC_PI_3, FRAC_PI_2, PI] {
            let mut s = StateVector::zero(1);
            s.apply_gate(&Gate::ry(0, 0, ParamRole::Trainable), &[theta]);
            assert!((s.expect_z(0) - theta.cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn hadamard_from_ry_rz_and_bell_state() {
        // H = i · RY(π/2) · RZ(π) up to global phase; check against the
        // textbook matrix before building a Bell state from it.
        let ry = ry_matrix(FRAC_PI_2);
        let rz = rz_matrix(PI);
        let mut h = [[ZERO; 2]; 2];
        for (r, row) in h.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = (0..2).map(|k| ry[r][k] * rz[k][c]).sum::<Complex64>() * Complex64::new(0.0, 1.0);
            }
        }
        let s2 = Complex64::new(FRAC_1_SQRT_2, 0.0);
        let expected = [[s2, s2], [s2, -s2]];
        for r in 0..2 {
            for c in 0..2 {
                assert!(close(h[r][c], expected[r][c], 1e-12), "H[{r}][{c}] = {}", h[r][c]);
            }
        }
        let mut s = StateVector::zero(2);
        s.apply_gate(&Gate::rz(0, 0, ParamRole::Trainable), &[PI, FRAC_PI_2]);
        s.apply_gate(&Gate::ry(0, 1, ParamRole::Trainable), &[PI, FRAC_PI_2]);
        s.apply_gate(&Gate::cnot(0, 1), &[]);
        assert!(s.expect_z(0).abs() < 1e-12);
        assert!(s.expect_z(1).abs() < 1e-12);
        let p00 = s.amplitudes()[0].norm_sqr();
        let p11 = s.amplitudes()[3].norm_sqr();
        assert!((p00 - 0.5).abs() < 1e-12 && (p11 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_parameter_ansatz_is_identity_on_zero_state() {
        let c = build_ansatz(3, 2).unwrap();
        let s = run(&c, &vec![0.0; c.n_params()]).unwrap();
        assert!(close(s.amplitudes()[0], ONE, 1e-12));
        assert!(s.amplitudes()[1..].iter().all(|a| a.norm() < 1e-12));
    }

    #[test]
    fn derivative_matrices_match_finite_differences() {
        let theta = 0.37;
        let h = 1e-6;
        for (m, dm) in [
            (rz_matrix as fn(f64) -> Matrix2, rz_derivative as fn(f64) -> Matrix2),
            (ry_matrix, ry_derivative),
        ] {
            let (p, q, d) = (m(theta + h), m(theta - h), dm(theta));
            for r in 0..2 {
                for c in 0..2 {
                    let fd = (p[r][c] - q[r][c]) / (2.0 * h);
                    assert!(close(fd, d[r][c], 1e-9));
                }
            }
        }
    }

    #[test]
    fn wrong_parameter_count_is_rejected() {
        let c = build_ansatz(3, 2).unwrap();
        assert!(run(&c, &[0.0; 3]).is_err());
    }
}
