use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::eval::evaluate;
use super::examples::Examples;
use super::optim::TrainConfig;
use super::train::{train_with_progress, TrainReport};
use crate::data::{split, ImageSample, SplitAssignment, TEST_FRACTION};
use crate::dqn::DressedQuantumNet;
use crate::error::Result;
use crate::metrics::MetricsReport;
use crate::models::{build_baseline, BaselineCnn, CtlHead, FrozenFeatures};
use crate::quantum::{Backend, NoiseModel};

/// Baseline → freeze → CTL and QTL heads, all on one patient split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferConfig {
    pub split_seed: u64,
    pub model_seed: u64,
    pub baseline: TrainConfig,
    pub ctl: TrainConfig,
    pub qtl: TrainConfig,
    pub n_qubits: usize,
    pub reps: usize,
    pub noise: NoiseModel,
}

pub struct TransferOutcome {
    pub split: SplitAssignment,
    pub baseline_model: BaselineCnn,
    pub frozen: Arc<FrozenFeatures>,
    pub ctl_head: CtlHead,
    pub qtl_head: DressedQuantumNet,
    pub train_features: Examples,
    pub test_features: Examples,
    pub baseline: MetricsReport,
    pub ctl: MetricsReport,
    pub qtl: MetricsReport,
    pub qtl_noisy: MetricsReport,
    pub curves: [TrainReport; 3],
}

/// Seeds for the three models derived from one base seed.
pub fn model_seeds(base: u64) -> (u64, u64, u64) {
    (base, base.wrapping_add(1), base.wrapping_add(2))
}

pub fn run_transfer(
    dataset: &[ImageSample],
    cfg: &TransferConfig,
    log: &mut dyn FnMut(&str),
) -> Result<TransferOutcome> {
    let assignment = split(dataset, cfg.split_seed, TEST_FRACTION)?;
    let images = Examples::from_images(dataset)?;
    let train_images = images.subset(&assignment.train);
    let test_images = images.subset(&assignment.test);
    log(&format!(
        "split: {} train / {} test images",
        train_images.len(),
        test_images.len()
    ));
    let (baseline_seed, ctl_seed, qtl_seed) = model_seeds(cfg.model_seed);

    let mut baseline_model = build_baseline(baseline_seed)?;
    let baseline_cfg = TrainConfig {
        seed: baseline_seed,
        ..cfg.baseline.clone()
    };
    let baseline_curve = train_with_progress(
        &mut baseline_model,
        &train_images,
        &baseline_cfg,
        &Backend::Ideal,
        &mut |e, l, lr| log(&format!("baseline epoch {e}: loss {l:.5} lr {lr:e}")),
    )?;
    let baseline = evaluate(&baseline_model, &test_images, &Backend::Ideal, "baseline")?;
    log(&format!("baseline test accuracy {:.4}", baseline.accuracy));

    let frozen = Arc::new(baseline_model.freeze()?);
    let train_features = train_images.to_features(&frozen)?;
    let test_features = test_images.to_features(&frozen)?;

    let mut ctl_head = CtlHead::new(ctl_seed)?;
    let ctl_cfg = TrainConfig {
        seed: ctl_seed,
        ..cfg.ctl.clone()
    };
    let ctl_curve = train_with_progress(
        &mut ctl_head,
        &train_features,
        &ctl_cfg,
        &Backend::Ideal,
        &mut |e, l, _| log(&format!("ctl epoch {e}: loss {l:.5}")),
    )?;
    let ctl = evaluate(&ctl_head, &test_features, &Backend::Ideal, "ctl")?;
    log(&format!("ctl test accuracy {:.4}", ctl.accuracy));

    let mut qtl_head = DressedQuantumNet::new(frozen.output_dim(), cfg.n_qubits, cfg.reps, qtl_seed)?;
    let qtl_cfg = TrainConfig {
        seed: qtl_seed,
        ..cfg.qtl.clone()
    };
    let qtl_curve = train_with_progress(
        &mut qtl_head,
        &train_features,
        &qtl_cfg,
        &Backend::Ideal,
        &mut |e, l, _| log(&format!("qtl epoch {e}: loss {l:.5}")),
    )?;
    let tag = format!("qtl-{}q{}r", cfg.n_qubits, cfg.reps);
    let qtl = evaluate(&qtl_head, &test_features, &Backend::Ideal, tag.clone())?;
    let qtl_noisy = evaluate(&qtl_head, &test_features, &Backend::noisy(cfg.noise), tag)?;
    log(&format!(
        "qtl test accuracy {:.4} (noisy {:.4})",
        qtl.accuracy, qtl_noisy.accuracy
    ));

    Ok(TransferOutcome {
        split: assignment,
        baseline_model,
        frozen,
        ctl_head,
        qtl_head,
        train_features,
        test_features,
        baseline,
        ctl,
        qtl,
        qtl_noisy,
        curves: [baseline_curve, ctl_curve, qtl_curve],
    })
}
