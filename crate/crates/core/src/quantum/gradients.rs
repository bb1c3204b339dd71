//! Exact circuit derivatives.
//!
//! [`adjoint_jacobian`] is the production path. [`shift_rule_gradients`],
//! [`finite_difference_gradients`] and [`oracle_gradients`] re-derive the
//! same quantities by re-running the circuit and serve as its reference.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use super::circuit::{Circuit, GateKind};
use super::statevector::{self, StateVector};
use crate::error::{Error, Result};

/// Pauli-Z on one wire.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observable {
    pub wire: usize,
}

impl Observable {
    pub fn z(wire: usize) -> Self {
        Self { wire }
    }

    /// `Z_0 … Z_{n−1}`.
    pub fn all_z(n_qubits: usize) -> Vec<Self> {
        (0..n_qubits).map(Self::z).collect()
    }
}

fn check_observables(circuit: &Circuit, observables: &[Observable]) -> Result<()> {
    if let Some(o) = observables.iter().find(|o| o.wire >= circuit.n_qubits()) {
        return Err(Error::Config(format!(
            "observable wire {} out of range for {} qubits",
            o.wire,
            circuit.n_qubits()
        )));
    }
    Ok(())
}

/// Expectations and their derivatives with respect to every parameter slot.
#[derive(Clone, Debug, PartialEq)]
pub struct Jacobian {
    pub expectations: Vec<f64>,
    /// `rows[k][j] = d⟨O_k⟩ / d params[j]`.
    pub rows: Vec<Vec<f64>>,
}

/// Adjoint-method derivatives: one forward statevector pass, then one
/// reverse sweep per observable that un-applies gates while carrying
/// `O|ψ⟩` alongside.
pub fn adjoint_jacobian(circuit: &Circuit, params: &[f64], observables: &[Observable]) -> Result<Jacobian> {
    check_observables(circuit, observables)?;
    let psi = statevector::run(circuit, params)?;
    let gates = circuit.gates();
    let mut expectations = Vec::with_capacity(observables.len());
    let mut rows = Vec::with_capacity(observables.len());
    for obs in observables {
        expectations.push(psi.expect_z(obs.wire));
        let mut row = vec![0.0; circuit.n_params()];
        let mut phi = psi.clone();
        let mut lambda = psi.clone();
        lambda.apply_z(obs.wire);
        for g in gates.iter().rev() {
            phi.apply_gate_adjoint(g, params);
            if let Some(slot) = g.param_slot {
                let mut mu = phi.clone();
                mu.apply_gate_derivative(g, params);
                row[slot] += 2.0 * lambda.inner(&mu).re;
            }
            lambda.apply_gate_adjoint(g, params);
        }
        rows.push(row);
    }
    Ok(Jacobian { expectations, rows })
}

/// `d⟨O_k⟩/dp_j` over all slots, embedding and trainable.
pub fn adjoint_gradients(circuit: &Circuit, params: &[f64], observables: &[Observable]) -> Result<Vec<Vec<f64>>> {
    Ok(adjoint_jacobian(circuit, params, observables)?.rows)
}

fn evaluate(circuit: &Circuit, params: &[f64], observables: &[Observable]) -> Result<Vec<f64>> {
    let s: StateVector = statevector::run(circuit, params)?;
    Ok(observables.iter().map(|o| s.expect_z(o.wire)).collect())
}

/// Central finite differences on every slot.
pub fn finite_difference_gradients(
    circuit: &Circuit,
    params: &[f64],
    observables: &[Observable],
    step: f64,
) -> Result<Vec<Vec<f64>>> {
    check_observables(circuit, observables)?;
    circuit.check_params(params)?;
    let mut rows = vec![vec![0.0; params.len()]; observables.len()];
    let mut p = params.to_vec();
    for j in 0..params.len() {
        p[j] = params[j] + step;
        let plus = evaluate(circuit, &p, observables)?;
        p[j] = params[j] - step;
        let minus = evaluate(circuit, &p, observables)?;
        p[j] = params[j];
        for k in 0..observables.len() {
            rows[k][j] = (plus[k] - minus[k]) / (2.0 * step);
        }
    }
    Ok(rows)
}

/// Slots that feed exactly one plain RZ/RY gate, where the two-term shift
/// rule is exact.
pub fn shift_rule_slots(circuit: &Circuit) -> Vec<bool> {
    let mut uses = vec![0usize; circuit.n_params()];
    let mut plain = vec![true; circuit.n_params()];
    for g in circuit.gates() {
        if let Some(s) = g.param_slot {
            uses[s] += 1;
            if g.kind == GateKind::Cry {
                plain[s] = false;
            }
        }
    }
    uses.iter().zip(plain).map(|(&u, p)| u == 1 && p).collect()
}

/// Two-term parameter shift, `[f(θ+π/2) − f(θ−π/2)]/2`, on the slots where
/// it applies; `None` entries for the others.
pub fn shift_rule_gradients(
    circuit: &Circuit,
    params: &[f64],
    observables: &[Observable],
) -> Result<Vec<Vec<Option<f64>>>> {
    check_observables(circuit, observables)?;
    circuit.check_params(params)?;
    let eligible = shift_rule_slots(circuit);
    let mut rows = vec![vec![None; params.len()]; observables.len()];
    let mut p = params.to_vec();
    for (j, ok) in eligible.iter().enumerate() {
        if !ok {
            continue;
        }
        p[j] = params[j] + FRAC_PI_2;
        let plus = evaluate(circuit, &p, observables)?;
        p[j] = params[j] - FRAC_PI_2;
        let minus = evaluate(circuit, &p, observables)?;
        p[j] = params[j];
        for k in 0..observables.len() {
            rows[k][j] = Some((plus[k] - minus[k]) / 2.0);
        }
    }
    Ok(rows)
}

pub const ORACLE_FD_STEP: f64 = 1e-6;

/// Reference derivatives: shift rule on RZ/RY slots, central differences
/// (step 1e-6) everywhere else, including CRY slots.
pub fn oracle_gradients(circuit: &Circuit, params: &[f64], observables: &[Observable]) -> Result<Vec<Vec<f64>>> {
    let shift = shift_rule_gradients(circuit, params, observables)?;
    let fd = finite_difference_gradients(circuit, params, observables, ORACLE_FD_STEP)?;
    Ok(shift
        .into_iter()
        .zip(fd)
        .map(|(s_row, f_row)| s_row.into_iter().zip(f_row).map(|(s, f)| s.unwrap_or(f)).collect())
        .collect())
}
