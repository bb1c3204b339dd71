use serde::{Deserialize, Serialize};

use crate::autodiff::{to_f32_grid, ParameterSet};
use crate::error::{Error, Result};

/// Bias-corrected Adam with a single step counter shared by all parameters.
#[derive(Clone, Debug)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Default for Adam {
    fn default() -> Self {
        Self::new(0.9, 0.999, 1e-8)
    }
}

impl Adam {
    pub fn new(beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            beta1,
            beta2,
            eps,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps(&self) -> i32 {
        self.t
    }

    /// Updates every trainable parameter from its stored gradient and snaps
    /// the result to the `f32` grid.
    pub fn step(&mut self, params: &mut ParameterSet, lr: f64) -> Result<()> {
        if let Some(p) = params.iter().find(|p| p.requires_grad && p.grad.is_none()) {
            return Err(Error::State(format!(
                "parameter {} has no gradient; run backward first",
                p.name
            )));
        }
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![0.0; p.value.len()]).collect();
            self.v = self.m.clone();
        } else if self.m.len() != params.len() {
            return Err(Error::State(
                "optimizer state belongs to a different parameter set".into(),
            ));
        }
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for ((p, m), v) in params.iter_mut().zip(&mut self.m).zip(&mut self.v) {
            let Some(g) = p.grad.as_ref().filter(|_| p.requires_grad) else {
                continue;
            };
            for (((w, &g), m), v) in p
                .value
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.iter_mut())
                .zip(v.iter_mut())
            {
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                let update = lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
                *w = to_f32_grid(*w - update);
            }
        }
        Ok(())
    }
}

/// `base · gamma^floor(epoch / step)`.
pub fn step_lr(epoch: usize, base_lr: f64, step: usize, gamma: f64) -> f64 {
    base_lr * gamma.powi((epoch / step) as i32)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lr: f64,
    pub step_size: usize,
    pub gamma: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            step_size: 10,
            gamma: 0.75,
            batch_size: 64,
            epochs: 100,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(Error::Config(format!(
                "lr must be finite and non-negative, got {}",
                self.lr
            )));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config(format!("gamma must lie in (0, 1], got {}", self.gamma)));
        }
        if self.step_size == 0 || self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Config(
                "step_size, batch_size and epochs must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn lr_at(&self, epoch: usize) -> f64 {
        step_lr(epoch, self.lr, self.step_size, self.gamma)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{ParamId, Tensor};

    fn with_grad(g: f64) -> (ParameterSet, ParamId) {
        let mut ps = ParameterSet::new();
        let id = ps.register("w", Tensor::full(&[3], 0.5)).unwrap();
        ps.zero_grad();
        ps.accumulate_grad(id, &[g, g, g]);
        (ps, id)
    }

    #[test]
    fn first_step_moves_by_lr_against_the_sign() {
        for g in [3.0, -0.02] {
            let (mut ps, id) = with_grad(g);
            Adam::default().step(&mut ps, 1e-3).unwrap();
            let delta = ps.value(id).data()[0] - 0.5;
            // the f32 snap adds at most half an ulp near 0.5
            assert!((delta + 1e-3 * f64::signum(g)).abs() < 1e-9 + 3e-8);
        }
    }

    #[test]
    fn zero_gradient_and_zero_lr_leave_weights_alone() {
        let (mut ps, id) = with_grad(0.0);
        Adam::default().step(&mut ps, 1e-3).unwrap();
        assert_eq!(ps.value(id).data(), &[0.5; 3]);
        let (mut ps, id) = with_grad(2.0);
        Adam::default().step(&mut ps, 0.0).unwrap();
        assert_eq!(ps.value(id).data(), &[0.5; 3]);
    }

    #[test]
    fn missing_gradient_is_a_state_error() {
        let mut ps = ParameterSet::new();
        ps.register("w", Tensor::zeros(&[1])).unwrap();
        assert!(matches!(Adam::default().step(&mut ps, 1e-3), Err(Error::State(_))));
    }

    #[test]
    fn scheduler_values() {
        assert_eq!(step_lr(0, 1e-4, 10, 0.75), 1e-4);
        assert!((step_lr(10, 1e-4, 10, 0.75) - 7.5e-5).abs() < 1e-18);
        assert!((step_lr(25, 1e-4, 10, 0.75) - 5.625e-5).abs() < 1e-18);
    }

    #[test]
    fn default_config_is_valid_and_strict() {
        TrainConfig::default().validate().unwrap();
        assert!(serde_json::from_str::<TrainConfig>(r#"{"lrr": 1}"#).is_err());
        let c: TrainConfig = serde_json::from_str(r#"{"epochs": 3}"#).unwrap();
        assert_eq!((c.epochs, c.batch_size, c.gamma), (3, 64, 0.75));
    }
}
