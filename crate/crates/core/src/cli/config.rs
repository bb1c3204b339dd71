use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::SynthConfig;
use crate::error::{Error, Result};
use crate::pipeline::{GridSpec, TrainConfig};
use crate::quantum::{build_ansatz, Backend};

pub const OUTPUT_DIR_ENV: &str = "QTL_OUTPUT_DIR";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum DataSource {
    /// `manifest.csv` path; relative paths resolve against the config file.
    Manifest(PathBuf),
    Synth(SynthConfig),
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Synth(SynthConfig {
            n_patients: 40,
            images_per_patient: 11,
            seed: 0,
            signal_strength: 0.15,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelSpec {
    Baseline,
    Ctl,
    Qtl { n_qubits: usize, reps: usize },
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec::Qtl { n_qubits: 6, reps: 4 }
    }
}

fn default_baseline_epochs() -> usize {
    10
}

/// A run description. Every field has a default; unknown keys are errors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub data: DataSource,
    #[serde(default)]
    pub train: TrainConfig,
    /// Epoch budget for the deliberately short baseline run.
    #[serde(default = "default_baseline_epochs")]
    pub baseline_epochs: usize,
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(default)]
    pub backend: Backend,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub grid: GridSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; a relative manifest path is taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        if let DataSource::Manifest(m) = &mut cfg.data {
            if m.is_relative() {
                if let Some(dir) = path.parent() {
                    *m = dir.join(&*m);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if let DataSource::Synth(s) = &self.data {
            s.validate()?;
        }
        self.train.validate()?;
        if self.baseline_epochs == 0 {
            return Err(Error::Config("baseline_epochs must be positive".into()));
        }
        if let ModelSpec::Qtl { n_qubits, reps } = self.model {
            build_ansatz(n_qubits, reps).map_err(|e| Error::Config(e.to_string()))?;
        }
        self.backend.validate()?;
        self.grid.validate()
    }

    pub fn baseline_train(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.baseline_epochs,
            ..self.train.clone()
        }
    }

    /// `output_dir`, else the environment fallback.
    pub fn resolve_output_dir(&self) -> Result<PathBuf> {
        if let Some(d) = &self.output_dir {
            return Ok(d.clone());
        }
        match std::env::var_os(OUTPUT_DIR_ENV) {
            Some(d) if !d.is_empty() => Ok(PathBuf::from(d)),
            _ => Err(Error::Config(format!(
                "no output_dir in the config and {OUTPUT_DIR_ENV} is not set"
            ))),
        }
    }
}
