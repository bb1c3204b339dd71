use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::examples::Examples;
use crate::autodiff::Tape;
use crate::dqn::DressedQuantumNet;
use crate::error::{Error, Result};
use crate::quantum::Backend;

/// Per-parameter gradient statistics over random circuit angles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlatnessStats {
    pub samples: usize,
    pub mean: Vec<f64>,
    /// Population variance.
    pub variance: Vec<f64>,
    pub mean_variance: f64,
}

/// Draws `n_samples` angle vectors uniformly from `[-π, π]^n_params` and
/// summarises `gradient(theta)` across them.
pub fn flatness_diagnostic(
    n_params: usize,
    n_samples: usize,
    seed: u64,
    mut gradient: impl FnMut(&[f64]) -> Result<Vec<f64>>,
) -> Result<FlatnessStats> {
    if n_samples == 0 {
        return Err(Error::Config("flatness diagnostic needs at least one sample".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = vec![0.0; n_params];
    let mut sum_sq = vec![0.0; n_params];
    for _ in 0..n_samples {
        let theta: Vec<f64> = (0..n_params).map(|_| rng.gen_range(-PI..PI)).collect();
        let g = gradient(&theta)?;
        if g.len() != n_params {
            return Err(Error::Dimension(format!(
                "gradient has {} entries, expected {n_params}",
                g.len()
            )));
        }
        for ((s, q), v) in sum.iter_mut().zip(&mut sum_sq).zip(&g) {
            *s += v;
            *q += v * v;
        }
    }
    let n = n_samples as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let variance: Vec<f64> = sum_sq
        .iter()
        .zip(&mean)
        .map(|(q, m)| (q / n - m * m).max(0.0))
        .collect();
    let mean_variance = if n_params == 0 {
        0.0
    } else {
        variance.iter().sum::<f64>() / n_params as f64
    };
    Ok(FlatnessStats {
        samples: n_samples,
        mean,
        variance,
        mean_variance,
    })
}

/// Loss gradient with respect to the circuit angles of `net` on a probe
/// batch, resampling the angles; the network itself is left untouched.
pub fn qtl_flatness(net: &DressedQuantumNet, probe: &Examples, n_samples: usize, seed: u64) -> Result<FlatnessStats> {
    let Some(theta_id) = net.theta_id() else {
        return Err(Error::Config("network has no trainable circuit angles".into()));
    };
    let x = probe.tensor_all()?;
    let targets: Vec<f64> = probe.labels().iter().map(|&y| f64::from(y)).collect();
    let n = net.theta().len();
    flatness_diagnostic(n, n_samples, seed, |theta| {
        let mut work = net.clone();
        work.params_mut().value_mut(theta_id).data_mut().copy_from_slice(theta);
        let mut tape = Tape::new();
        let input = tape.constant(x.clone());
        let logits = work.forward(&mut tape, input, &Backend::Ideal, true)?;
        let loss = tape.bce_with_logits(logits, &targets)?;
        tape.backward(loss, work.params_mut())?;
        Ok(work
            .params()
            .grad(theta_id)
            .expect("theta is trainable")
            .data()
            .to_vec())
    })
}
