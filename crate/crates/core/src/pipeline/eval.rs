use super::examples::Examples;
use crate::autodiff::sigmoid;
use crate::error::{Error, Result};
use crate::metrics::MetricsReport;
use crate::models::{predict_logits, Trainable};
use crate::quantum::Backend;

/// Sigmoid probabilities for every row, forward-only.
pub fn predict_probabilities(model: &dyn Trainable, data: &Examples, backend: &Backend) -> Result<Vec<f64>> {
    if data.is_empty() {
        return Ok(Vec::new());
    }
    Ok(predict_logits(model, &data.tensor_all()?, backend)?
        .into_iter()
        .map(sigmoid)
        .collect())
}

pub fn evaluate(
    model: &dyn Trainable,
    data: &Examples,
    backend: &Backend,
    model_tag: impl Into<String>,
) -> Result<MetricsReport> {
    if data.is_empty() {
        return Err(Error::Metric("test set is empty".into()));
    }
    let probs = predict_probabilities(model, data, backend)?;
    MetricsReport::compute(model_tag, backend.tag(), &probs, data.labels())
}
