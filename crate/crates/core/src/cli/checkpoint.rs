//! Binary weight files.
//!
//! Layout: `b"QTLC"`, format version (u32 LE), header length (u32 LE), a
//! UTF-8 JSON header `{"model": {...}, "tensors": [{name, shape, dtype}]}`,
//! then every tensor as little-endian `f32` in header order.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::config::ModelSpec;
use crate::autodiff::{ParameterSet, Tensor};
use crate::dqn::DressedQuantumNet;
use crate::error::{Error, Result};
use crate::models::{build_baseline, BaselineCnn, CtlHead, CtlModel, QtlModel, Trainable, TransferModel, FEATURE_DIM};
use crate::pipeline::write_atomic;

pub const MAGIC: &[u8; 4] = b"QTLC";
pub const VERSION: u32 = 1;
const PREFIX_LEN: usize = 12;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorRecord {
    pub name: String,
    pub shape: Vec<usize>,
    pub dtype: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    model: ModelSpec,
    tensors: Vec<TensorRecord>,
}

pub fn encode(model: ModelSpec, tensors: &[(&str, &Tensor)]) -> Result<Vec<u8>> {
    let header = Header {
        model,
        tensors: tensors
            .iter()
            .map(|(name, t)| TensorRecord {
                name: name.to_string(),
                shape: t.shape().to_vec(),
                dtype: "f32".into(),
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header)?;
    let header_len = u32::try_from(json.len()).map_err(|_| Error::Validation("checkpoint header too large".into()))?;
    let n_values: usize = tensors.iter().map(|(_, t)| t.len()).sum();
    let mut out = Vec::with_capacity(PREFIX_LEN + json.len() + 4 * n_values);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&header_len.to_le_bytes());
    out.extend_from_slice(&json);
    for (_, t) in tensors {
        for &v in t.data() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::CorruptCheckpoint(msg.into())
}

pub fn decode(bytes: &[u8]) -> Result<(ModelSpec, Vec<(String, Tensor)>)> {
    if bytes.len() < PREFIX_LEN {
        return Err(corrupt(format!(
            "file is {} bytes, shorter than the fixed prefix",
            bytes.len()
        )));
    }
    if &bytes[..4] != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(corrupt(format!(
            "unsupported format version {version}, expected {VERSION}"
        )));
    }
    let header_len = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let body = &bytes[PREFIX_LEN..];
    if header_len > body.len() {
        return Err(corrupt("header length exceeds file size"));
    }
    let header: Header =
        serde_json::from_slice(&body[..header_len]).map_err(|e| corrupt(format!("bad header: {e}")))?;
    let payload = &body[header_len..];
    let mut expected = 0usize;
    for t in &header.tensors {
        if t.dtype != "f32" {
            return Err(corrupt(format!("tensor {} has dtype {}", t.name, t.dtype)));
        }
        let n = t
            .shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .filter(|&n| n > 0)
            .ok_or_else(|| corrupt(format!("tensor {} has invalid shape {:?}", t.name, t.shape)))?;
        expected = expected
            .checked_add(n * 4)
            .ok_or_else(|| corrupt("tensor sizes overflow"))?;
    }
    if expected != payload.len() {
        return Err(corrupt(format!(
            "header lists {expected} data bytes but {} remain",
            payload.len()
        )));
    }
    let mut offset = 0;
    let mut tensors = Vec::with_capacity(header.tensors.len());
    for t in header.tensors {
        let n: usize = t.shape.iter().product();
        let data = payload[offset..offset + 4 * n]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
            .collect();
        offset += 4 * n;
        tensors.push((t.name, Tensor::new(t.shape, data)?));
    }
    Ok((header.model, tensors))
}

/// A model that can be saved: the baseline, or frozen features plus a head.
#[derive(Clone, Debug)]
pub enum Model {
    Baseline(BaselineCnn),
    Ctl(CtlModel),
    Qtl(QtlModel),
}

impl Model {
    pub fn header(&self) -> ModelSpec {
        match self {
            Model::Baseline(_) => ModelSpec::Baseline,
            Model::Ctl(_) => ModelSpec::Ctl,
            Model::Qtl(m) => ModelSpec::Qtl {
                n_qubits: m.head.n_qubits(),
                reps: m.head.reps(),
            },
        }
    }

    /// Row label for reports.
    pub fn label(&self) -> String {
        match self.header() {
            ModelSpec::Baseline => "baseline".into(),
            ModelSpec::Ctl => "ctl".into(),
            ModelSpec::Qtl { n_qubits, reps } => format!("qtl-{n_qubits}q{reps}r"),
        }
    }

    /// Image-input view of the model.
    pub fn as_trainable(&self) -> &dyn Trainable {
        match self {
            Model::Baseline(m) => m,
            Model::Ctl(m) => m,
            Model::Qtl(m) => m,
        }
    }

    fn parameter_sets(&self) -> Vec<&ParameterSet> {
        match self {
            Model::Baseline(m) => vec![m.params()],
            Model::Ctl(m) => vec![m.features.params(), m.head.params()],
            Model::Qtl(m) => vec![m.features.params(), m.head.params()],
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let tensors: Vec<(&str, &Tensor)> = self
            .parameter_sets()
            .into_iter()
            .flat_map(|ps| ps.iter().map(|p| (p.name.as_str(), &p.value)))
            .collect();
        encode(self.header(), &tensors)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (header, tensors) = decode(bytes)?;
        let mut src = ParameterSet::new();
        for (name, t) in tensors {
            src.register(name, t).map_err(|e| corrupt(e.to_string()))?;
        }
        let mut model = skeleton(header)?;
        let expected: usize = model.parameter_sets().iter().map(|ps| ps.len()).sum();
        if src.len() != expected {
            return Err(corrupt(format!("{} tensors for a model with {expected}", src.len())));
        }
        let load = |r: Result<()>| r.map_err(|e| corrupt(e.to_string()));
        match &mut model {
            Model::Baseline(m) => load(m.params_mut().load_values_from(&src))?,
            Model::Ctl(m) => {
                load(Arc::make_mut(&mut m.features).load_values_from(&src))?;
                load(m.head.params_mut().load_values_from(&src))?;
            }
            Model::Qtl(m) => {
                load(Arc::make_mut(&mut m.features).load_values_from(&src))?;
                load(m.head.params_mut().load_values_from(&src))?;
            }
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

fn skeleton(header: ModelSpec) -> Result<Model> {
    let baseline = build_baseline(0)?;
    Ok(match header {
        ModelSpec::Baseline => Model::Baseline(baseline),
        ModelSpec::Ctl => Model::Ctl(TransferModel {
            features: Arc::new(baseline.freeze()?),
            head: CtlHead::new(0)?,
        }),
        ModelSpec::Qtl { n_qubits, reps } => Model::Qtl(TransferModel {
            features: Arc::new(baseline.freeze()?),
            head: DressedQuantumNet::new(FEATURE_DIM, n_qubits, reps, 0).map_err(|e| corrupt(e.to_string()))?,
        }),
    })
}
