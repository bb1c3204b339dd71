use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::metrics::MetricsReport;
use crate::quantum::Backend;

/// What produced a result: model kind, circuit size, seed and backend.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunTag {
    /// `baseline`, `ctl` or `qtl`.
    pub model: String,
    pub n_qubits: Option<usize>,
    pub reps: Option<usize>,
    pub seed: u64,
    pub backend: Backend,
}

impl RunTag {
    /// Row label used in reports, e.g. `qtl-6q4r`.
    pub fn label(&self) -> String {
        match (self.n_qubits, self.reps) {
            (Some(n), Some(r)) => format!("{}-{n}q{r}r", self.model),
            _ => self.model.clone(),
        }
    }
}

/// A persisted evaluation, one JSON file per run or grid cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultRecord {
    pub config: RunTag,
    pub metrics: MetricsReport,
    pub noisy_metrics: Option<MetricsReport>,
    pub loss_curve: Vec<f64>,
    pub final_train_loss: f64,
    pub completed: bool,
}

impl ResultRecord {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }

    /// Writes to a sibling temp file and renames it into place.
    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, serde_json::to_string_pretty(self)?.as_bytes())
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}
