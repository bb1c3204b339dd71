use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_QUBITS: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GateKind {
    #[serde(rename = "RZ")]
    Rz,
    #[serde(rename = "RY")]
    Ry,
    #[serde(rename = "CNOT")]
    Cnot,
    #[serde(rename = "CRY")]
    Cry,
}

impl GateKind {
    pub fn arity(self) -> usize {
        match self {
            GateKind::Rz | GateKind::Ry => 1,
            GateKind::Cnot | GateKind::Cry => 2,
        }
    }

    pub fn is_parameterized(self) -> bool {
        !matches!(self, GateKind::Cnot)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamRole {
    Embedding,
    Trainable,
}

/// One gate. Two-qubit gates list `[control, target]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gate {
    pub kind: GateKind,
    pub wires: Vec<usize>,
    pub param_slot: Option<usize>,
    pub param_role: Option<ParamRole>,
}

impl Gate {
    pub fn rz(wire: usize, slot: usize, role: ParamRole) -> Self {
        Self::rotation(GateKind::Rz, vec![wire], slot, role)
    }

    pub fn ry(wire: usize, slot: usize, role: ParamRole) -> Self {
        Self::rotation(GateKind::Ry, vec![wire], slot, role)
    }

    pub fn cry(control: usize, target: usize, slot: usize, role: ParamRole) -> Self {
        Self::rotation(GateKind::Cry, vec![control, target], slot, role)
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        Self {
            kind: GateKind::Cnot,
            wires: vec![control, target],
            param_slot: None,
            param_role: None,
        }
    }

    fn rotation(kind: GateKind, wires: Vec<usize>, slot: usize, role: ParamRole) -> Self {
        Self {
            kind,
            wires,
            param_slot: Some(slot),
            param_role: Some(role),
        }
    }

    /// Angle for this gate from a full parameter vector.
    pub fn angle(&self, params: &[f64]) -> f64 {
        self.param_slot.map_or(0.0, |s| params[s])
    }

    fn validate(&self, n_qubits: usize, n_slots: usize, n_embedding: usize) -> Result<()> {
        if self.wires.len() != self.kind.arity() {
            return Err(Error::Config(format!(
                "{:?} needs {} wire(s), got {:?}",
                self.kind,
                self.kind.arity(),
                self.wires
            )));
        }
        if let Some(&w) = self.wires.iter().find(|&&w| w >= n_qubits) {
            return Err(Error::Config(format!("wire {w} out of range for {n_qubits} qubits")));
        }
        if self.wires.len() == 2 && self.wires[0] == self.wires[1] {
            return Err(Error::Config(format!("{:?} wires must be distinct", self.kind)));
        }
        match (self.kind.is_parameterized(), self.param_slot, self.param_role) {
            (false, None, None) => Ok(()),
            (false, _, _) => Err(Error::Config("CNOT carries no parameter".into())),
            (true, Some(slot), Some(role)) => {
                if slot >= n_slots {
                    return Err(Error::Config(format!(
                        "parameter slot {slot} out of range ({n_slots} slots)"
                    )));
                }
                let is_embedding = slot < n_embedding;
                if is_embedding != (role == ParamRole::Embedding) {
                    return Err(Error::Config(format!(
                        "slot {slot} role {role:?} inconsistent with {n_embedding} embedding slots"
                    )));
                }
                Ok(())
            }
            (true, _, _) => Err(Error::Config(format!(
                "{:?} needs exactly one parameter slot and role",
                self.kind
            ))),
        }
    }
}

/// Ordered gate list over `n_qubits`. Parameter slots `[0, n_embedding)`
/// hold embedding angles and `[n_embedding, n_embedding + n_trainable)` the
/// trainable angles.
///
/// Qubit 0 is the most significant bit of a basis-state label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Circuit {
    n_qubits: usize,
    gates: Vec<Gate>,
    n_embedding_params: usize,
    n_trainable_params: usize,
}

impl Circuit {
    pub fn new(
        n_qubits: usize,
        gates: Vec<Gate>,
        n_embedding_params: usize,
        n_trainable_params: usize,
    ) -> Result<Self> {
        let c = Self {
            n_qubits,
            gates,
            n_embedding_params,
            n_trainable_params,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_QUBITS).contains(&self.n_qubits) {
            return Err(Error::Config(format!(
                "n_qubits {} outside [1, {MAX_QUBITS}]",
                self.n_qubits
            )));
        }
        let slots = self.n_params();
        for g in &self.gates {
            g.validate(self.n_qubits, slots, self.n_embedding_params)?;
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: Circuit = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("circuit serializes")
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn n_embedding_params(&self) -> usize {
        self.n_embedding_params
    }

    pub fn n_trainable_params(&self) -> usize {
        self.n_trainable_params
    }

    pub fn n_params(&self) -> usize {
        self.n_embedding_params + self.n_trainable_params
    }

    /// Counts of (single-qubit, two-qubit) gates.
    pub fn gate_counts(&self) -> (usize, usize) {
        let one = self.gates.iter().filter(|g| g.kind.arity() == 1).count();
        (one, self.gates.len() - one)
    }

    pub(crate) fn check_params(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.n_params() {
            return Err(Error::Dimension(format!(
                "circuit needs {} parameters, got {}",
                self.n_params(),
                params.len()
            )));
        }
        Ok(())
    }
}

pub const ANSATZ_QUBITS: std::ops::RangeInclusive<usize> = 3..=10;
pub const ANSATZ_REPS: std::ops::RangeInclusive<usize> = 2..=4;

/// Angle embedding followed by `reps` repetitions of
/// `RZ layer → CNOT ring → CRY ring`.
///
/// Embedding: `RY(x_i)` on wire `i`, slots `0..n`. Repetition `r` uses
/// trainable slots `n + 2nr .. n + 2nr + n` for the RZ layer and the next
/// `n` for the CRY ring. Rings run `i → (i+1) mod n`.
pub fn build_ansatz(n_qubits: usize, reps: usize) -> Result<Circuit> {
    if !ANSATZ_QUBITS.contains(&n_qubits) {
        return Err(Error::Config(format!(
            "n_qubits {n_qubits} outside [{}, {}]",
            ANSATZ_QUBITS.start(),
            ANSATZ_QUBITS.end()
        )));
    }
    if !ANSATZ_REPS.contains(&reps) {
        return Err(Error::Config(format!(
            "reps {reps} outside [{}, {}]",
            ANSATZ_REPS.start(),
            ANSATZ_REPS.end()
        )));
    }
    let n = n_qubits;
    let mut gates = Vec::with_capacity(n + reps * 3 * n);
    for i in 0..n {
        gates.push(Gate::ry(i, i, ParamRole::Embedding));
    }
    for r in 0..reps {
        let base = n + 2 * n * r;
        for i in 0..n {
            gates.push(Gate::rz(i, base + i, ParamRole::Trainable));
        }
        for i in 0..n {
            gates.push(Gate::cnot(i, (i + 1) % n));
        }
        for i in 0..n {
            gates.push(Gate::cry(i, (i + 1) % n, base + n + i, ParamRole::Trainable));
        }
    }
    Circuit::new(n, gates, n, 2 * n * reps)
}
