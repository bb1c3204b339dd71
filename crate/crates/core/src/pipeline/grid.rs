use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::eval::evaluate;
use super::examples::Examples;
use super::optim::TrainConfig;
use super::record::{ResultRecord, RunTag};
use super::train::train;
use crate::dqn::DressedQuantumNet;
use crate::error::{Error, Result};
use crate::quantum::circuit::{ANSATZ_QUBITS, ANSATZ_REPS};
use crate::quantum::{Backend, NoiseModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntRange {
    pub min: usize,
    pub max: usize,
}

impl IntRange {
    fn values(&self) -> std::ops::RangeInclusive<usize> {
        self.min..=self.max
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub qubits: IntRange,
    pub reps: IntRange,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            qubits: IntRange { min: 3, max: 10 },
            reps: IntRange { min: 2, max: 4 },
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        let check = |r: IntRange, allowed: std::ops::RangeInclusive<usize>, what: &str| {
            if r.min > r.max || !allowed.contains(&r.min) || !allowed.contains(&r.max) {
                return Err(Error::Config(format!(
                    "{what} range {}..={} must lie within {}..={}",
                    r.min,
                    r.max,
                    allowed.start(),
                    allowed.end()
                )));
            }
            Ok(())
        };
        check(self.qubits, ANSATZ_QUBITS, "qubit")?;
        check(self.reps, ANSATZ_REPS, "repetition")
    }

    /// Cells in sweep order: qubits ascending, then repetitions ascending.
    pub fn cells(&self) -> Vec<(usize, usize)> {
        self.qubits
            .values()
            .flat_map(|n| self.reps.values().map(move |r| (n, r)))
            .collect()
    }
}

/// Independent seed per cell (splitmix64 finaliser over the base seed and
/// the cell coordinates).
pub fn cell_seed(base: u64, n_qubits: usize, reps: usize) -> u64 {
    let mut z = base ^ ((n_qubits as u64) << 32 | reps as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn cell_file_name(n_qubits: usize, reps: usize) -> String {
    format!("cell_q{n_qubits:02}_r{reps}.json")
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentResult {
    pub record: ResultRecord,
    /// Zero for cells restored from disk.
    pub wall_clock_seconds: f64,
}

#[derive(Clone, Debug)]
pub struct GridOptions {
    pub out_dir: Option<PathBuf>,
    pub jobs: usize,
    pub model_seed: u64,
    /// Stop after running this many new cells (simulates an interruption).
    pub limit: Option<usize>,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self {
            out_dir: None,
            jobs: 1,
            model_seed: 0,
            limit: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GridOutcome {
    /// In sweep order; only cells that are done.
    pub results: Vec<ExperimentResult>,
    pub complete: bool,
    /// `(n_qubits, reps)` of the best ideal test accuracy, present when the
    /// sweep is complete. Ties go to the earlier (smaller) cell.
    pub best: Option<(usize, usize)>,
}

fn restore(dir: Option<&Path>, n: usize, r: usize) -> Option<ResultRecord> {
    let rec = ResultRecord::load(&dir?.join(cell_file_name(n, r))).ok()?;
    rec.completed.then_some(rec)
}

fn run_cell(
    train_set: &Examples,
    test_set: &Examples,
    cfg: &TrainConfig,
    noise: Option<NoiseModel>,
    n: usize,
    reps: usize,
    seed: u64,
) -> Result<ResultRecord> {
    let mut net = DressedQuantumNet::new(train_set.row_len(), n, reps, seed)?;
    let cell_cfg = TrainConfig { seed, ..cfg.clone() };
    let report = train(&mut net, train_set, &cell_cfg, &Backend::Ideal)?;
    let tag = RunTag {
        model: "qtl".into(),
        n_qubits: Some(n),
        reps: Some(reps),
        seed,
        backend: Backend::Ideal,
    };
    let metrics = evaluate(&net, test_set, &Backend::Ideal, tag.label())?;
    let noisy_metrics = noise
        .map(|m| evaluate(&net, test_set, &Backend::noisy(m), tag.label()))
        .transpose()?;
    Ok(ResultRecord {
        config: tag,
        metrics,
        noisy_metrics,
        final_train_loss: report.final_loss(),
        loss_curve: report.loss_curve,
        completed: true,
    })
}

/// Trains and evaluates a dressed quantum head for every `(qubits, reps)`
/// cell on fixed feature sets. With an output directory each finished cell is
/// persisted, and cells already on disk are not re-run.
pub fn grid_search(
    train_set: &Examples,
    test_set: &Examples,
    spec: &GridSpec,
    cfg: &TrainConfig,
    noise: Option<NoiseModel>,
    opts: &GridOptions,
) -> Result<GridOutcome> {
    spec.validate()?;
    cfg.validate()?;
    if let Some(d) = &opts.out_dir {
        std::fs::create_dir_all(d)?;
    }
    let dir = opts.out_dir.as_deref();
    let cells = spec.cells();
    let mut done: Vec<Option<ExperimentResult>> = cells
        .iter()
        .map(|&(n, r)| {
            restore(dir, n, r).map(|record| ExperimentResult {
                record,
                wall_clock_seconds: 0.0,
            })
        })
        .collect();
    let mut pending: Vec<usize> = (0..cells.len()).filter(|&i| done[i].is_none()).collect();
    if let Some(limit) = opts.limit {
        pending.truncate(limit);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.max(1))
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let fresh: Vec<(usize, ExperimentResult)> = pool.install(|| {
        pending
            .par_iter()
            .map(|&i| {
                let (n, r) = cells[i];
                let start = Instant::now();
                let record = run_cell(train_set, test_set, cfg, noise, n, r, cell_seed(opts.model_seed, n, r))?;
                if let Some(d) = dir {
                    record.save(&d.join(cell_file_name(n, r)))?;
                }
                let wall_clock_seconds = start.elapsed().as_secs_f64();
                Ok((
                    i,
                    ExperimentResult {
                        record,
                        wall_clock_seconds,
                    },
                ))
            })
            .collect::<Result<_>>()
    })?;
    for (i, res) in fresh {
        done[i] = Some(res);
    }
    let complete = done.iter().all(Option::is_some);
    let results: Vec<ExperimentResult> = done.into_iter().flatten().collect();
    let best = complete.then(|| best_cell(&results)).flatten();
    Ok(GridOutcome {
        results,
        complete,
        best,
    })
}

/// Argmax of ideal accuracy over results in sweep order; the first wins ties.
pub fn best_cell(results: &[ExperimentResult]) -> Option<(usize, usize)> {
    let mut best: Option<&ExperimentResult> = None;
    for r in results {
        if best.is_none_or(|b| r.record.metrics.accuracy > b.record.metrics.accuracy) {
            best = Some(r);
        }
    }
    best.and_then(|b| Some((b.record.config.n_qubits?, b.record.config.reps?)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_has_24_cells_in_order() {
        let cells = GridSpec::default().cells();
        assert_eq!(cells.len(), 24);
        assert_eq!(cells[0], (3, 2));
        assert_eq!(cells[1], (3, 3));
        assert_eq!(cells[23], (10, 4));
        let single = GridSpec {
            qubits: IntRange { min: 6, max: 6 },
            reps: IntRange { min: 4, max: 4 },
        };
        assert_eq!(single.cells(), vec![(6, 4)]);
    }

    #[test]
    fn out_of_range_specs_rejected() {
        let bad = GridSpec {
            qubits: IntRange { min: 2, max: 6 },
            ..GridSpec::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn cell_seeds_differ() {
        let seeds: std::collections::BTreeSet<u64> = GridSpec::default()
            .cells()
            .iter()
            .map(|&(n, r)| cell_seed(5, n, r))
            .collect();
        assert_eq!(seeds.len(), 24);
    }
}
