use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::examples::Examples;
use super::optim::{Adam, TrainConfig};
use crate::autodiff::Tape;
use crate::error::{Error, Result};
use crate::models::{Mode, Trainable};
use crate::quantum::Backend;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Sample-weighted mean batch loss per epoch.
    pub loss_curve: Vec<f64>,
    pub lr_curve: Vec<f64>,
    pub steps: usize,
}

impl TrainReport {
    pub fn final_loss(&self) -> f64 {
        self.loss_curve.last().copied().unwrap_or(f64::NAN)
    }
}

/// Minimises mean binary cross-entropy with Adam and the step scheduler.
pub fn train(model: &mut dyn Trainable, data: &Examples, cfg: &TrainConfig, backend: &Backend) -> Result<TrainReport> {
    train_with_progress(model, data, cfg, backend, &mut |_, _, _| {})
}

/// As [`train`], calling `progress(epoch, loss, lr)` after every epoch.
pub fn train_with_progress(
    model: &mut dyn Trainable,
    data: &Examples,
    cfg: &TrainConfig,
    backend: &Backend,
    progress: &mut dyn FnMut(usize, f64, f64),
) -> Result<TrainReport> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Validation("training set is empty".into()));
    }
    if backend.noise_model().is_some() {
        return Err(Error::Capability(
            "training runs on the ideal backend; the noisy backend is inference-only".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::default();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut report = TrainReport {
        loss_curve: Vec::with_capacity(cfg.epochs),
        lr_curve: Vec::with_capacity(cfg.epochs),
        steps: 0,
    };
    for epoch in 0..cfg.epochs {
        let lr = cfg.lr_at(epoch);
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (batch, idx) in order.chunks(cfg.batch_size).enumerate() {
            let targets: Vec<f64> = idx.iter().map(|&i| f64::from(data.labels()[i])).collect();
            let diverged = |e: Error| match e {
                Error::NonFinite(_) => Error::NonFiniteLoss { epoch, batch, lr },
                other => other,
            };
            let mut tape = Tape::new();
            let x = tape.constant(data.tensor(idx)?);
            let logits = model
                .forward(&mut tape, x, &mut Mode::Train(&mut rng), backend)
                .map_err(diverged)?;
            let loss = tape.bce_with_logits(logits, &targets).map_err(diverged)?;
            let value = tape.value(loss).item()?;
            tape.backward(loss, model.params_mut()).map_err(diverged)?;
            adam.step(model.params_mut(), lr)?;
            total += value * idx.len() as f64;
            report.steps += 1;
        }
        let mean = total / data.len() as f64;
        report.loss_curve.push(mean);
        report.lr_curve.push(lr);
        progress(epoch, mean, lr);
    }
    Ok(report)
}
