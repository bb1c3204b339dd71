use serde::{Deserialize, Serialize};

use super::circuit::Circuit;
use super::density::{noisy_expectations, NoiseModel};
use super::statevector;
use crate::error::Result;
use crate::metrics::BackendTag;

/// Where circuits are evaluated: exact statevector, or density matrix with
/// depolarizing noise (inference only).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Backend {
    #[default]
    Ideal,
    Noisy {
        r_1q: f64,
        r_2q: f64,
    },
}

impl Backend {
    pub fn noisy(model: NoiseModel) -> Self {
        Backend::Noisy {
            r_1q: model.r_1q,
            r_2q: model.r_2q,
        }
    }

    pub fn noise_model(&self) -> Option<NoiseModel> {
        match *self {
            Backend::Ideal => None,
            Backend::Noisy { r_1q, r_2q } => Some(NoiseModel { r_1q, r_2q }),
        }
    }

    pub fn tag(&self) -> BackendTag {
        match self {
            Backend::Ideal => BackendTag::Ideal,
            Backend::Noisy { .. } => BackendTag::Noisy,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.noise_model() {
            Some(m) => m.validate(),
            None => Ok(()),
        }
    }

    /// `⟨Z_w⟩` on every wire.
    pub fn expectations(&self, circuit: &Circuit, params: &[f64]) -> Result<Vec<f64>> {
        match self.noise_model() {
            None => statevector::expectations(circuit, params),
            Some(m) => noisy_expectations(circuit, params, &m),
        }
    }
}
