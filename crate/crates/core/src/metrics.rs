//! Binary classification metrics: confusion counts, precision / recall /
//! F1 / accuracy, and ROC AUC via the Mann-Whitney statistic.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

fn check_inputs(scores: &[f64], labels: &[u8]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::Metric(format!(
            "{} scores vs {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.is_empty() {
        return Err(Error::Metric("no samples".into()));
    }
    if let Some(l) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::Metric(format!("non-binary label {l}")));
    }
    Ok(())
}

/// Predicts class 1 iff `probability >= threshold`.
pub fn confusion(probabilities: &[f64], labels: &[u8], threshold: f64) -> Result<ConfusionCounts> {
    check_inputs(probabilities, labels)?;
    let mut c = ConfusionCounts::default();
    for (&p, &y) in probabilities.iter().zip(labels) {
        match (p >= threshold, y == 1) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prf1 {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
}

/// Zero denominators give 0 for precision, recall and F1.
pub fn prf1(c: &ConfusionCounts) -> Result<Prf1> {
    let total = c.total();
    if total == 0 {
        return Err(Error::Metric("empty confusion counts".into()));
    }
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(Prf1 {
        precision,
        recall,
        f1,
        accuracy: (c.tp + c.tn) as f64 / total as f64,
    })
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half. Computed from mid-ranks in `O(n log n)`.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    check_inputs(scores, labels)?;
    let pos = labels.iter().filter(|&&l| l == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Metric("AUC needs both classes".into()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Metric("NaN score".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap_or(Ordering::Equal));

    let mut pos_rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 share their mean
        let mid = (i + j + 2) as f64 / 2.0;
        let tied_pos = order[i..=j].iter().filter(|&&k| labels[k] == 1).count();
        pos_rank_sum += mid * tied_pos as f64;
        i = j + 1;
    }
    let (p, n) = (pos as f64, neg as f64);
    let u = pos_rank_sum - p * (p + 1.0) / 2.0;
    Ok(u / (p * n))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendTag {
    Ideal,
    Noisy,
}

impl std::fmt::Display for BackendTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BackendTag::Ideal => "ideal",
            BackendTag::Noisy => "noisy",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub model_tag: String,
    pub backend_tag: BackendTag,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auc: f64,
    pub counts: ConfusionCounts,
}

impl MetricsReport {
    /// Thresholds `probabilities` at 0.5 and scores AUC on them.
    pub fn compute(
        model_tag: impl Into<String>,
        backend_tag: BackendTag,
        probabilities: &[f64],
        labels: &[u8],
    ) -> Result<Self> {
        let counts = confusion(probabilities, labels, DEFAULT_THRESHOLD)?;
        let m = prf1(&counts)?;
        Ok(Self {
            model_tag: model_tag.into(),
            backend_tag,
            accuracy: m.accuracy,
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
            auc: auc(probabilities, labels)?,
            counts,
        })
    }
}

/// `100·(new − base)/base`; `None` when `base` is zero.
pub fn relative_improvement(new: f64, base: f64) -> Option<f64> {
    (base != 0.0).then(|| 100.0 * (new - base) / base)
}
