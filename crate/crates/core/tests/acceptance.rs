//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL` line.

use std::collections::BTreeSet;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::sync::{Arc, OnceLock};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qtl::autodiff::{ActivationKind, Tape, Tensor};
use qtl::cli::checkpoint::Model;
use qtl::cli::report;
use qtl::data::{split, synth_generate, SynthConfig, PINNED_TRAIN_PATIENTS, TEST_FRACTION};
use qtl::dqn::{dqn_forward, DressedQuantumNet};
use qtl::metrics::{auc, confusion, prf1};
use qtl::models::{
    build_baseline, make_ctl_head, make_qtl_model, shape_chain, Trainable, CONV_LAYERS, FEATURE_DIM, IMAGE_SIZE,
};
use qtl::pipeline::{
    cell_file_name, grid_search, run_transfer, step_lr, train, Examples, GridOptions, GridSpec, ResultRecord,
    TrainConfig, TransferConfig, TransferOutcome,
};
use qtl::quantum::{
    adjoint_jacobian, build_ansatz, expectations, finite_difference_gradients, noisy_expectations,
    shift_rule_gradients, simulate_noisy_observed, Backend, Circuit, Gate, NoiseModel, Observable, ParamRole,
};

fn verdict(id: u32, name: &str, ok: bool, detail: &str) {
    println!(
        "criterion {id:>2} {name}: {} ({detail})",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "criterion {id} {name} failed: {detail}");
}

/// RY embedding on every wire, then `layers` rounds of random RZ/RY
/// rotations and random CNOT/CRY pairs.
fn random_circuit(n: usize, layers: usize, rng: &mut ChaCha8Rng) -> Circuit {
    let mut gates: Vec<Gate> = (0..n).map(|i| Gate::ry(i, i, ParamRole::Embedding)).collect();
    let mut slot = n;
    for _ in 0..layers {
        for w in 0..n {
            gates.push(if rng.gen_bool(0.5) {
                Gate::rz(w, slot, ParamRole::Trainable)
            } else {
                Gate::ry(w, slot, ParamRole::Trainable)
            });
            slot += 1;
        }
        for _ in 0..n {
            let a = rng.gen_range(0..n);
            let b = (a + rng.gen_range(1..n)) % n;
            if rng.gen_bool(0.5) {
                gates.push(Gate::cnot(a, b));
            } else {
                gates.push(Gate::cry(a, b, slot, ParamRole::Trainable));
                slot += 1;
            }
        }
    }
    Circuit::new(n, gates, n, slot - n).unwrap()
}

fn random_params(c: &Circuit, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..c.n_params()).map(|_| rng.gen_range(-3.2..3.2)).collect()
}

#[test]
fn c01_quantum_gradient_triangle() {
    let start = Instant::now();
    let (mut circuits, mut shift_err, mut fd_err) = (0, 0.0f64, 0.0f64);
    for n in 3..=6 {
        for reps in 2..=4 {
            for seed in 0..10u64 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed * 100 + (n * 10 + reps) as u64);
                let c = if seed % 2 == 0 {
                    build_ansatz(n, reps).unwrap()
                } else {
                    random_circuit(n, reps, &mut rng)
                };
                let p = random_params(&c, &mut rng);
                let obs = Observable::all_z(n);
                let adj = adjoint_jacobian(&c, &p, &obs).unwrap().rows;
                let shift = shift_rule_gradients(&c, &p, &obs).unwrap();
                let fd = finite_difference_gradients(&c, &p, &obs, 1e-5).unwrap();
                for k in 0..n {
                    for j in 0..p.len() {
                        if let Some(s) = shift[k][j] {
                            shift_err = shift_err.max((adj[k][j] - s).abs());
                        }
                        fd_err = fd_err.max((adj[k][j] - fd[k][j]).abs());
                    }
                }
                circuits += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        1,
        "adjoint vs shift rule and finite differences",
        circuits >= 90 && shift_err <= 1e-8 && fd_err <= 1e-5 && secs < 60.0,
        &format!("{circuits} circuits, max shift err {shift_err:.2e}, max fd err {fd_err:.2e}, {secs:.1}s"),
    );
}

#[test]
fn c02_hybrid_gradient() {
    let start = Instant::now();
    let input_dim = 24;
    let mut worst = 0.0f64;
    let mut cases = 0;
    for n in [3, 4] {
        for reps in [2, 3] {
            for seed in 0..5u64 {
                let mut net = DressedQuantumNet::new(input_dim, n, reps, seed).unwrap();
                let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
                // Spread theta beyond its small initial range so every slot matters.
                if let Some(id) = net.theta_id() {
                    for v in net.params_mut().value_mut(id).data_mut() {
                        *v = rng.gen_range(-1.5..1.5);
                    }
                }
                let z: Vec<f64> = (0..input_dim).map(|_| rng.gen_range(0.0..1.0)).collect();
                let grads = dqn_forward(&z, &net, &Backend::Ideal)
                    .unwrap()
                    .backward(&mut net, 1.0)
                    .unwrap();
                let (pw, pb) = net.pre_net_ids();
                let (qw, qb) = net.post_net_ids();
                let mut ids = vec![
                    (pw, grads.pre_net_weight.data().to_vec()),
                    (pb, grads.pre_net_bias.data().to_vec()),
                ];
                if let Some(t) = net.theta_id() {
                    ids.push((t, grads.theta.clone()));
                }
                ids.push((qw, grads.post_net_weight.data().to_vec()));
                ids.push((qb, grads.post_net_bias.data().to_vec()));
                let h = 1e-6;
                for (id, analytic) in ids {
                    for (j, &a) in analytic.iter().enumerate() {
                        let orig = net.params().value(id).data()[j];
                        net.params_mut().value_mut(id).data_mut()[j] = orig + h;
                        let plus = net.logit(&z, &Backend::Ideal).unwrap();
                        net.params_mut().value_mut(id).data_mut()[j] = orig - h;
                        let minus = net.logit(&z, &Backend::Ideal).unwrap();
                        net.params_mut().value_mut(id).data_mut()[j] = orig;
                        let fd = (plus - minus) / (2.0 * h);
                        worst = worst.max((a - fd).abs() / fd.abs().max(1e-6));
                    }
                }
                cases += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        2,
        "hybrid head gradient vs finite differences",
        cases == 20 && worst <= 1e-3 && secs < 120.0,
        &format!("{cases} nets, max relative err {worst:.2e}, {secs:.1}s"),
    );
}

#[test]
fn c03_noise_channel() {
    let c = Circuit::new(1, vec![Gate::ry(0, 0, ParamRole::Trainable)], 0, 1).unwrap();
    let mut worst = 0.0f64;
    for theta in [0.0, FRAC_PI_4, FRAC_PI_2] {
        for p in [0.0, 2.67e-4, 0.5, 1.0] {
            let z = noisy_expectations(&c, &[theta], &NoiseModel::new(p, 0.0).unwrap()).unwrap()[0];
            worst = worst.max((z - (1.0 - p) * theta.cos()).abs());
        }
    }
    let mut checked = 0;
    let mut invariant_failure = None;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = random_circuit(rng.gen_range(2..=5), 2, &mut rng);
        let p = random_params(&c, &mut rng);
        let res = simulate_noisy_observed(&c, &p, &NoiseModel::FORTE1, |_, rho| {
            checked += 1;
            rho.check_invariants()
        });
        if let Err(e) = res {
            invariant_failure = Some(e.to_string());
        }
    }
    verdict(
        3,
        "depolarizing channel closed form and density invariants",
        worst <= 1e-12 && invariant_failure.is_none(),
        &format!(
            "max closed-form err {worst:.2e}, {checked} post-gate states checked{}",
            invariant_failure.map(|e| format!(", {e}")).unwrap_or_default()
        ),
    );
}

#[test]
fn c04_backend_equivalence() {
    let mut worst = 0.0f64;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
        let n = 2 + (seed as usize % 7);
        let c = random_circuit(n, 2, &mut rng);
        let p = random_params(&c, &mut rng);
        let ideal = expectations(&c, &p).unwrap();
        let zero = Backend::noisy(NoiseModel::new(0.0, 0.0).unwrap());
        let noisy = zero.expectations(&c, &p).unwrap();
        for (a, b) in ideal.iter().zip(&noisy) {
            worst = worst.max((a - b).abs());
        }
    }
    verdict(
        4,
        "zero-rate density backend matches statevector",
        worst <= 1e-10,
        &format!("20 circuits up to 8 qubits, max err {worst:.2e}"),
    );
}

fn tiny_images(n_patients: u32, per_patient: u32, seed: u64) -> Examples {
    let cfg = SynthConfig {
        n_patients,
        images_per_patient: per_patient,
        seed,
        signal_strength: 0.5,
    };
    Examples::from_images(&synth_generate(&cfg, None).unwrap()).unwrap()
}

#[test]
fn c05_shape_and_freeze_audit() {
    let baseline = build_baseline(3).unwrap();
    let mut tape = Tape::new();
    let mut x = tape.constant(Tensor::zeros(&[1, 1, IMAGE_SIZE, IMAGE_SIZE]));
    let mut sides = vec![IMAGE_SIZE];
    for (i, layer) in CONV_LAYERS.iter().enumerate() {
        let p = baseline.params();
        let w = tape.constant(p.value(p.find(&format!("conv{i}.weight")).unwrap()).clone());
        let b = tape.constant(p.value(p.find(&format!("conv{i}.bias")).unwrap()).clone());
        x = tape.conv2d(x, w, b, layer.stride).unwrap();
        sides.push(tape.value(x).shape()[2]);
        x = tape.activation(x, ActivationKind::Relu).unwrap();
        if layer.pool_after {
            x = tape.maxpool2d(x, 2, 1).unwrap();
            sides.push(tape.value(x).shape()[2]);
        }
    }
    let flat = tape.flatten(x).unwrap();
    let width = tape.value(flat).shape()[1];
    let chain_ok = sides == vec![128, 63, 62, 28, 27, 10, 9, 6] && sides == shape_chain(IMAGE_SIZE).unwrap();

    let checkpoint = Model::Baseline(baseline.clone()).to_bytes().unwrap();
    let frozen = Arc::new(baseline.freeze().unwrap());
    let extracted = frozen.extract(&Tensor::zeros(&[1, 1, IMAGE_SIZE, IMAGE_SIZE])).unwrap();
    let data = tiny_images(4, 1, 7);
    let cfg = TrainConfig {
        lr: 1e-2,
        batch_size: 4,
        epochs: 100,
        step_size: 1000,
        ..TrainConfig::default()
    };
    let mut ctl = make_ctl_head(frozen.clone(), 1).unwrap();
    let mut qtl = make_qtl_model(frozen.clone(), 3, 2, 2).unwrap();
    let ctl_before = ctl.head.params().clone();
    let ctl_steps = train(&mut ctl, &data, &cfg, &Backend::Ideal).unwrap().steps;
    let qtl_steps = train(&mut qtl, &data, &cfg, &Backend::Ideal).unwrap().steps;

    let reference = match Model::from_bytes(&checkpoint).unwrap() {
        Model::Baseline(b) => b.freeze().unwrap(),
        _ => unreachable!(),
    };
    let ctl_frozen = ctl.features.params().bit_identical(reference.params());
    let qtl_frozen = qtl.features.params().bit_identical(reference.params());
    let head_moved = !ctl.head.params().bit_identical(&ctl_before);
    verdict(
        5,
        "shape chain and frozen conv weights",
        chain_ok
            && width == FEATURE_DIM
            && extracted.shape() == [1, FEATURE_DIM]
            && ctl_steps == 100
            && qtl_steps == 100
            && ctl_frozen
            && qtl_frozen
            && head_moved,
        &format!(
            "sides {sides:?}, width {width}, steps ctl {ctl_steps} qtl {qtl_steps}, conv unchanged ctl {ctl_frozen} qtl {qtl_frozen}"
        ),
    );
}

/// Synthetic cohort and training budget for the transfer comparison.
const TRANSFER_PATIENTS: u32 = 40;
const TRANSFER_IMAGES_PER_PATIENT: u32 = 11;
const TRANSFER_SIGNAL: f64 = 0.15;
const BASELINE_EPOCHS: usize = 1;
const HEAD_EPOCHS: usize = 30;
const CTL_LR: f64 = 1e-4;
const CTL_BATCH: usize = 8;
const QTL_LR: f64 = 3e-3;
const QTL_BATCH: usize = 16;
const TRANSFER_SEEDS: [u64; 3] = [0, 1, 2];

struct TransferRuns {
    outcomes: Vec<TransferOutcome>,
    elapsed: Duration,
}

fn transfer_runs() -> &'static TransferRuns {
    static RUNS: OnceLock<TransferRuns> = OnceLock::new();
    RUNS.get_or_init(|| {
        let start = Instant::now();
        let outcomes = TRANSFER_SEEDS
            .iter()
            .map(|&seed| {
                let data = synth_generate(
                    &SynthConfig {
                        n_patients: TRANSFER_PATIENTS,
                        images_per_patient: TRANSFER_IMAGES_PER_PATIENT,
                        seed,
                        signal_strength: TRANSFER_SIGNAL,
                    },
                    None,
                )
                .unwrap();
                let cfg = TransferConfig {
                    split_seed: seed,
                    model_seed: seed,
                    baseline: TrainConfig {
                        epochs: BASELINE_EPOCHS,
                        ..TrainConfig::default()
                    },
                    ctl: TrainConfig {
                        epochs: HEAD_EPOCHS,
                        lr: CTL_LR,
                        batch_size: CTL_BATCH,
                        ..TrainConfig::default()
                    },
                    qtl: TrainConfig {
                        epochs: HEAD_EPOCHS,
                        lr: QTL_LR,
                        batch_size: QTL_BATCH,
                        ..TrainConfig::default()
                    },
                    n_qubits: 6,
                    reps: 4,
                    noise: NoiseModel::FORTE1,
                };
                run_transfer(&data, &cfg, &mut |_| {}).unwrap()
            })
            .collect();
        TransferRuns {
            outcomes,
            elapsed: start.elapsed(),
        }
    })
}

#[test]
fn c06_transfer_improves_on_weak_baseline() {
    let runs = transfer_runs();
    let mut passed = 0;
    let mut lines = Vec::new();
    for (seed, o) in TRANSFER_SEEDS.iter().zip(&runs.outcomes) {
        let b = o.baseline.accuracy;
        let ok =
            b <= 0.80 && o.ctl.accuracy >= b + 0.05 && o.qtl.accuracy >= b + 0.05 && o.qtl.recall >= o.baseline.recall;
        passed += ok as usize;
        lines.push(format!(
            "seed {seed}: base {:.3}/r{:.2} ctl {:.3} qtl {:.3}/r{:.2} {}",
            b,
            o.baseline.recall,
            o.ctl.accuracy,
            o.qtl.accuracy,
            o.qtl.recall,
            if ok { "ok" } else { "miss" }
        ));
    }
    let n_images = TRANSFER_PATIENTS * TRANSFER_IMAGES_PER_PATIENT;
    let secs = runs.elapsed.as_secs_f64();
    verdict(
        6,
        "CTL and QTL beat the weakened baseline",
        2 * passed > TRANSFER_SEEDS.len()
            && TRANSFER_PATIENTS >= 12
            && n_images >= 400
            && HEAD_EPOCHS <= 30
            && BASELINE_EPOCHS <= 30
            && secs < 1800.0,
        &format!("{passed}/3 seeds; {}; {secs:.0}s", lines.join("; ")),
    );
}

#[test]
fn c07_noise_robustness() {
    let runs = transfer_runs();
    let mut worst_acc = 0.0f64;
    let mut violations = 0;
    let mut worst_dev = 0.0f64;
    let mut samples = 0;
    let noisy = Backend::noisy(NoiseModel::FORTE1);
    for o in &runs.outcomes {
        worst_acc = worst_acc.max((o.qtl_noisy.accuracy - o.qtl.accuracy).abs());
        let (g1, g2) = o.qtl_head.circuit().gate_counts();
        let bound = NoiseModel::FORTE1.deviation_bound(g1, g2) + 1e-9;
        for i in 0..o.test_features.len() {
            let z = o.test_features.row(i);
            let a = o.qtl_head.expectations(z, &Backend::Ideal).unwrap();
            let b = o.qtl_head.expectations(z, &noisy).unwrap();
            for (x, y) in a.iter().zip(&b) {
                let d = (x - y).abs();
                worst_dev = worst_dev.max(d);
                violations += (d > bound) as usize;
            }
            samples += 1;
        }
    }
    let (g1, g2) = build_ansatz(6, 4).unwrap().gate_counts();
    verdict(
        7,
        "noisy inference tracks ideal",
        worst_acc <= 0.03 && violations == 0,
        &format!(
            "max |noisy-ideal| accuracy {:.2} pp, {samples} samples, max expectation shift {worst_dev:.2e} vs bound {:.2e}",
            100.0 * worst_acc,
            NoiseModel::FORTE1.deviation_bound(g1, g2)
        ),
    );
}

fn feature_set(n: usize, dim: usize, seed: u64) -> Examples {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
    let data = labels
        .iter()
        .flat_map(|&y| {
            (0..dim)
                .map(|_| rng.gen_range(0.0..1.0) + 0.3 * y as f64)
                .collect::<Vec<_>>()
        })
        .collect();
    Examples::new(vec![dim], data, labels, (0..n as u32).collect()).unwrap()
}

fn aggregate_csv(dir: &std::path::Path) -> String {
    let records: Vec<ResultRecord> = report::collect_results(dir)
        .unwrap()
        .into_iter()
        .map(|(_, r)| r)
        .collect();
    report::to_csv(&report::table(&report::rows_of(&records)).unwrap()).unwrap()
}

#[test]
fn c08_grid_mechanics() {
    let train_set = feature_set(16, 6, 1);
    let test_set = feature_set(8, 6, 2);
    let cfg = TrainConfig {
        lr: 1e-2,
        batch_size: 8,
        epochs: 1,
        ..TrainConfig::default()
    };
    let spec = GridSpec::default();
    let full_dir = tempfile::tempdir().unwrap();
    let full = grid_search(
        &train_set,
        &test_set,
        &spec,
        &cfg,
        None,
        &GridOptions {
            out_dir: Some(full_dir.path().to_path_buf()),
            ..GridOptions::default()
        },
    )
    .unwrap();

    let resumed_dir = tempfile::tempdir().unwrap();
    let mut passes = 0;
    let resumed = loop {
        passes += 1;
        let o = grid_search(
            &train_set,
            &test_set,
            &spec,
            &cfg,
            None,
            &GridOptions {
                out_dir: Some(resumed_dir.path().to_path_buf()),
                limit: Some(7),
                ..GridOptions::default()
            },
        )
        .unwrap();
        if o.complete {
            break o;
        }
    };
    let files_equal = spec.cells().iter().all(|&(n, r)| {
        let name = cell_file_name(n, r);
        std::fs::read(full_dir.path().join(&name)).unwrap() == std::fs::read(resumed_dir.path().join(&name)).unwrap()
    });
    let same_report = aggregate_csv(full_dir.path()) == aggregate_csv(resumed_dir.path());
    verdict(
        8,
        "grid size and resume",
        full.results.len() == 24 && resumed.results.len() == 24 && passes == 4 && files_equal && same_report,
        &format!(
            "{} cells, resumed in {passes} passes, cell files identical {files_equal}, report identical {same_report}",
            full.results.len()
        ),
    );
}

#[test]
fn c09_split_law() {
    let start = Instant::now();
    let cohorts: Vec<Vec<qtl::data::ImageSample>> = [4u32, 12, 33]
        .iter()
        .map(|&n| {
            synth_generate(
                &SynthConfig {
                    n_patients: n,
                    images_per_patient: 2,
                    seed: n as u64,
                    signal_strength: 0.1,
                },
                None,
            )
            .unwrap()
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut violations = 0;
    for k in 0..1000 {
        let data = &cohorts[k % cohorts.len()];
        let s = split(data, rng.gen(), TEST_FRACTION).unwrap();
        let train_p: BTreeSet<u32> = s.train.iter().map(|&i| data[i].patient_id).collect();
        let test_p: BTreeSet<u32> = s.test.iter().map(|&i| data[i].patient_id).collect();
        let covered = s.train.len() + s.test.len() == data.len();
        let pinned = PINNED_TRAIN_PATIENTS
            .iter()
            .all(|p| train_p.contains(p) && !test_p.contains(p));
        if !(train_p.is_disjoint(&test_p) && pinned && covered && !test_p.is_empty()) {
            violations += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        9,
        "patient-grouped split",
        violations == 0 && secs < 10.0,
        &format!("1000 seeds, {violations} violations, {secs:.2}s"),
    );
}

/// Area under the ROC polyline through every distinct threshold.
fn trapezoid_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let pos = labels.iter().filter(|&&y| y == 1).count() as f64;
    let neg = labels.len() as f64 - pos;
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    thresholds.dedup();
    let (mut area, mut prev_tpr, mut prev_fpr) = (0.0, 0.0, 0.0);
    for t in thresholds {
        let tp = scores.iter().zip(labels).filter(|(s, y)| **s >= t && **y == 1).count() as f64;
        let fp = scores.iter().zip(labels).filter(|(s, y)| **s >= t && **y == 0).count() as f64;
        let (tpr, fpr) = (tp / pos, fp / neg);
        area += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
        prev_tpr = tpr;
        prev_fpr = fpr;
    }
    area
}

#[test]
fn c10_metric_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut count_mismatch = 0;
    for _ in 0..200 {
        let n = rng.gen_range(1..12);
        let probs: Vec<f64> = (0..n)
            .map(|_| (rng.gen_range(0.0..1.0f64) * 10.0).round() / 10.0)
            .collect();
        let labels: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2)).collect();
        let (mut tp, mut fp, mut tn, mut fneg) = (0usize, 0usize, 0usize, 0usize);
        for (p, y) in probs.iter().zip(&labels) {
            match (*p >= 0.5, *y == 1) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, false) => tn += 1,
                (false, true) => fneg += 1,
            }
        }
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fneg);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        let accuracy = ratio(tp + tn, n);
        let c = confusion(&probs, &labels, 0.5).unwrap();
        let m = prf1(&c).unwrap();
        let same = (c.tp, c.fp, c.tn, c.fn_) == (tp, fp, tn, fneg)
            && (m.precision - precision).abs() < 1e-15
            && (m.recall - recall).abs() < 1e-15
            && (m.f1 - f1).abs() < 1e-15
            && (m.accuracy - accuracy).abs() < 1e-15;
        count_mismatch += !same as usize;
    }
    let mut auc_err = 0.0f64;
    for k in 0..100 {
        let n = rng.gen_range(2..40);
        let scores: Vec<f64> = (0..n)
            .map(|_| (rng.gen_range(0.0..1.0f64) * 8.0).round() / 8.0)
            .collect();
        let mut labels: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2)).collect();
        labels[0] = (k % 2) as u8;
        labels[1] = 1 - labels[0];
        auc_err = auc_err.max((auc(&scores, &labels).unwrap() - trapezoid_auc(&scores, &labels)).abs());
    }
    let mut lr_mismatch = 0;
    for e in 0..100usize {
        let k = (e / 10) as u32;
        let exact = 1e-4 * (3u64.pow(k) as f64 / 4u64.pow(k) as f64);
        lr_mismatch += (step_lr(e, 1e-4, 10, 0.75) != exact) as usize;
    }
    verdict(
        10,
        "metric and scheduler oracles",
        count_mismatch == 0 && auc_err <= 1e-12 && lr_mismatch == 0,
        &format!("{count_mismatch} count mismatches, max AUC err {auc_err:.2e}, {lr_mismatch} lr mismatches"),
    );
}

fn run_cli(args: &[&str]) -> i32 {
    qtl::cli::run(std::iter::once("qtl").chain(args.iter().copied()))
}

/// Baseline, both heads and the report in `dir`; returns every artifact.
fn cli_pipeline(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let config = serde_json::json!({
        "data": {"synth": {"n_patients": 12, "images_per_patient": 2, "seed": 4, "signal_strength": 0.5}},
        "train": {"epochs": 2, "batch_size": 8, "lr": 0.001},
        "baseline_epochs": 1,
        "model": {"kind": "qtl", "n_qubits": 3, "reps": 2},
        "output_dir": dir,
        "seed": 0
    });
    let cfg_path = dir.join("run.json");
    std::fs::write(&cfg_path, config.to_string()).unwrap();
    let cfg = cfg_path.to_str().unwrap();
    for args in [
        vec!["train-baseline", "--config", cfg],
        vec!["finetune", "--config", cfg, "--mode", "ctl"],
        vec!["finetune", "--config", cfg, "--mode", "qtl"],
        vec!["report", "--results", dir.to_str().unwrap()],
    ] {
        assert_eq!(run_cli(&args), 0, "qtl {args:?}");
    }
    ["baseline.qtlc", "ctl.qtlc", "qtl.qtlc", "report.csv"]
        .iter()
        .map(|f| (f.to_string(), std::fs::read(dir.join(f)).unwrap()))
        .collect()
}

#[test]
fn c11_determinism_and_persistence() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let first = cli_pipeline(a.path());
    let second = cli_pipeline(b.path());
    let reproducible = first == second;

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut exact = 0;
    for k in 0..50u64 {
        let baseline = build_baseline(rng.gen()).unwrap();
        let model = match k % 3 {
            0 => Model::Baseline(baseline),
            1 => Model::Ctl(make_ctl_head(Arc::new(baseline.freeze().unwrap()), rng.gen()).unwrap()),
            _ => Model::Qtl(
                make_qtl_model(
                    Arc::new(baseline.freeze().unwrap()),
                    rng.gen_range(3..=6),
                    rng.gen_range(2..=4),
                    rng.gen(),
                )
                .unwrap(),
            ),
        };
        let bytes = model.to_bytes().unwrap();
        let back = Model::from_bytes(&bytes).unwrap();
        let same_params = match (&model, &back) {
            (Model::Baseline(x), Model::Baseline(y)) => x.params().bit_identical(y.params()),
            (Model::Ctl(x), Model::Ctl(y)) => {
                x.head.params().bit_identical(y.head.params()) && x.features.params().bit_identical(y.features.params())
            }
            (Model::Qtl(x), Model::Qtl(y)) => {
                x.head.params().bit_identical(y.head.params()) && x.features.params().bit_identical(y.features.params())
            }
            _ => false,
        };
        exact += (same_params && back.to_bytes().unwrap() == bytes) as usize;
    }
    verdict(
        11,
        "reproducible artifacts and exact checkpoints",
        reproducible && exact == 50,
        &format!("rerun artifacts identical {reproducible}, {exact}/50 checkpoints round-trip exactly"),
    );
}
