use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::eval::evaluate;
use super::examples::Examples;
use super::optim::TrainConfig;
use super::train::train;
use crate::data::PINNED_TRAIN_PATIENTS;
use crate::error::{Error, Result};
use crate::metrics::MetricsReport;
use crate::models::Trainable;
use crate::quantum::Backend;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub validate: Vec<usize>,
    pub validation_patients: Vec<u32>,
}

/// Patient-grouped folds. Non-pinned patients are shuffled, ordered by their
/// majority label, and dealt round-robin, so each fold sees both classes
/// whenever each class has at least `k` patients. Pinned patients are
/// always on the training side.
pub fn kfold_assign(patient_ids: &[u32], labels: &[u8], k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(Error::Config(format!("k must be at least 2, got {k}")));
    }
    let mut votes: BTreeMap<u32, (usize, usize)> = BTreeMap::new();
    for (&p, &y) in patient_ids.iter().zip(labels) {
        if !PINNED_TRAIN_PATIENTS.contains(&p) {
            let e = votes.entry(p).or_default();
            if y == 1 {
                e.1 += 1
            } else {
                e.0 += 1
            }
        }
    }
    if votes.len() < k {
        return Err(Error::Config(format!(
            "{k}-fold cross-validation needs {k} patients besides the pinned ones, found {}",
            votes.len()
        )));
    }
    let mut patients: Vec<u32> = votes.keys().copied().collect();
    patients.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    patients.sort_by_key(|p| {
        let (neg, pos) = votes[p];
        pos > neg
    });
    let fold_of: BTreeMap<u32, usize> = patients.iter().enumerate().map(|(i, &p)| (p, i % k)).collect();
    Ok((0..k)
        .map(|f| {
            let (validate, train): (Vec<usize>, Vec<usize>) =
                (0..patient_ids.len()).partition(|&i| fold_of.get(&patient_ids[i]) == Some(&f));
            let mut validation_patients: Vec<u32> = fold_of.iter().filter(|(_, &g)| g == f).map(|(&p, _)| p).collect();
            validation_patients.sort_unstable();
            Fold {
                train,
                validate,
                validation_patients,
            }
        })
        .collect())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auc: f64,
}

impl MetricSummary {
    fn of(r: &MetricsReport) -> Self {
        Self {
            accuracy: r.accuracy,
            precision: r.precision,
            recall: r.recall,
            f1: r.f1,
            auc: r.auc,
        }
    }

    fn map2(a: Self, b: Self, f: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            accuracy: f(a.accuracy, b.accuracy),
            precision: f(a.precision, b.precision),
            recall: f(a.recall, b.recall),
            f1: f(a.f1, b.f1),
            auc: f(a.auc, b.auc),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: Vec<MetricsReport>,
    pub mean: MetricSummary,
    /// Population standard deviation.
    pub std: MetricSummary,
}

impl CvReport {
    pub fn from_folds(folds: Vec<MetricsReport>) -> Result<Self> {
        if folds.is_empty() {
            return Err(Error::Metric("no folds".into()));
        }
        let n = folds.len() as f64;
        let sum = folds
            .iter()
            .map(MetricSummary::of)
            .fold(MetricSummary::default(), |a, b| MetricSummary::map2(a, b, |x, y| x + y));
        let mean = MetricSummary::map2(sum, sum, |x, _| x / n);
        let sq = folds
            .iter()
            .map(MetricSummary::of)
            .fold(MetricSummary::default(), |a, b| {
                let d = MetricSummary::map2(b, mean, |x, m| (x - m) * (x - m));
                MetricSummary::map2(a, d, |x, y| x + y)
            });
        let std = MetricSummary::map2(sq, sq, |x, _| (x / n).sqrt());
        Ok(Self { folds, mean, std })
    }
}

/// Trains a fresh model per fold and validates it on the held-out patients.
pub fn kfold_cv(
    data: &Examples,
    k: usize,
    seed: u64,
    model_factory: &dyn Fn(usize) -> Result<Box<dyn Trainable>>,
    cfg: &TrainConfig,
    model_tag: &str,
) -> Result<CvReport> {
    let folds = kfold_assign(data.patient_ids(), data.labels(), k, seed)?;
    let mut reports = Vec::with_capacity(k);
    for (i, fold) in folds.iter().enumerate() {
        let mut model = model_factory(i)?;
        train(model.as_mut(), &data.subset(&fold.train), cfg, &Backend::Ideal)?;
        reports.push(evaluate(
            model.as_ref(),
            &data.subset(&fold.validate),
            &Backend::Ideal,
            model_tag,
        )?);
    }
    CvReport::from_folds(reports)
}
