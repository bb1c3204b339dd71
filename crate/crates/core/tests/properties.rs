use std::collections::BTreeSet;
use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qtl::autodiff::{to_f32_grid, ParameterSet, Tape, Tensor};
use qtl::cli::checkpoint::{decode, Model};
use qtl::data::{split_patients, PINNED_TRAIN_PATIENTS};
use qtl::dqn::{scale_embedding, DressedQuantumNet};
use qtl::metrics::{auc, confusion, prf1, BackendTag, ConfusionCounts, MetricsReport};
use qtl::models::{build_baseline, make_ctl_head, make_qtl_model};
use qtl::pipeline::{
    best_cell, kfold_assign, step_lr, train, Adam, Examples, ExperimentResult, ResultRecord, RunTag, TrainConfig,
};
use qtl::quantum::{build_ansatz, expectations, simulate_noisy, Backend, NoiseModel, StateVector};

fn cases(n: u32) -> ProptestConfig {
    ProptestConfig::with_cases(n)
}

proptest! {
    #![proptest_config(cases(256))]

    #[test]
    fn split_never_leaks_patients(
        ids in prop::collection::vec(1u32..40, 1..120),
        seed in any::<u64>(),
        fraction in 0.05f64..0.95,
    ) {
        match split_patients(&ids, seed, fraction) {
            Ok(s) => {
                let train: BTreeSet<u32> = s.train.iter().map(|&i| ids[i]).collect();
                let test: BTreeSet<u32> = s.test.iter().map(|&i| ids[i]).collect();
                prop_assert!(train.is_disjoint(&test));
                prop_assert_eq!(s.train.len() + s.test.len(), ids.len());
                prop_assert!(!test.is_empty());
                for p in PINNED_TRAIN_PATIENTS {
                    prop_assert!(!test.contains(&p));
                }
            }
            Err(e) => prop_assert!(ids.iter().all(|p| PINNED_TRAIN_PATIENTS.contains(p)), "{e}"),
        }
    }

    #[test]
    fn folds_partition_patients(n_patients in 4u32..30, k in 2usize..5, seed in any::<u64>()) {
        prop_assume!(n_patients as usize - PINNED_TRAIN_PATIENTS.len() >= k);
        let ids: Vec<u32> = (1..=n_patients).flat_map(|p| [p, p]).collect();
        let labels: Vec<u8> = ids.iter().map(|p| (p % 2) as u8).collect();
        let folds = kfold_assign(&ids, &labels, k, seed).unwrap();
        prop_assert_eq!(folds.len(), k);
        let mut seen = BTreeSet::new();
        for f in &folds {
            let val: BTreeSet<u32> = f.validate.iter().map(|&i| ids[i]).collect();
            let tr: BTreeSet<u32> = f.train.iter().map(|&i| ids[i]).collect();
            prop_assert!(val.is_disjoint(&tr));
            prop_assert_eq!(f.train.len() + f.validate.len(), ids.len());
            for p in val {
                prop_assert!(!PINNED_TRAIN_PATIENTS.contains(&p));
                prop_assert!(seen.insert(p), "patient {} validated twice", p);
            }
        }
        prop_assert_eq!(seen.len(), n_patients as usize - PINNED_TRAIN_PATIENTS.len());
    }

    #[test]
    fn embedding_angles_stay_in_range(v in prop::collection::vec(prop_oneof![-1e9f64..1e9, -5.0f64..5.0], 1..12)) {
        let a = scale_embedding(&v).unwrap();
        for (x, y) in v.iter().zip(a.as_slice()) {
            prop_assert!(y.abs() <= FRAC_PI_2);
            prop_assert!((y - FRAC_PI_2 * x.tanh()).abs() < 1e-12);
        }
    }

    #[test]
    fn counts_and_f1_are_consistent(
        pairs in prop::collection::vec((0.0f64..1.0, 0u8..2), 1..60),
        threshold in 0.0f64..1.0,
    ) {
        let (p, y): (Vec<f64>, Vec<u8>) = pairs.into_iter().unzip();
        let c = confusion(&p, &y, threshold).unwrap();
        prop_assert_eq!(c.total(), p.len());
        let m = prf1(&c).unwrap();
        for v in [m.precision, m.recall, m.f1, m.accuracy] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        if m.precision + m.recall > 0.0 {
            let f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
            prop_assert!((m.f1 - f1).abs() < 1e-12);
        }
    }

    #[test]
    fn auc_matches_pair_count(pairs in prop::collection::vec((0u8..6, 0u8..2), 2..50)) {
        let scores: Vec<f64> = pairs.iter().map(|(s, _)| *s as f64 / 5.0).collect();
        let labels: Vec<u8> = pairs.iter().map(|(_, y)| *y).collect();
        let pos: Vec<f64> = scores.iter().zip(&labels).filter(|(_, y)| **y == 1).map(|(s, _)| *s).collect();
        let neg: Vec<f64> = scores.iter().zip(&labels).filter(|(_, y)| **y == 0).map(|(s, _)| *s).collect();
        match auc(&scores, &labels) {
            Ok(a) => {
                let mut wins = 0.0;
                for p in &pos {
                    for n in &neg {
                        wins += if p > n { 1.0 } else if p == n { 0.5 } else { 0.0 };
                    }
                }
                prop_assert!((a - wins / (pos.len() * neg.len()) as f64).abs() < 1e-12);
                let flipped: Vec<f64> = scores.iter().map(|s| 1.0 - s).collect();
                prop_assert!((auc(&flipped, &labels).unwrap() - (1.0 - a)).abs() < 1e-12);
            }
            Err(_) => prop_assert!(pos.is_empty() || neg.is_empty()),
        }
    }

    #[test]
    fn schedule_is_piecewise_constant_and_decreasing(base in 1e-6f64..1.0, step in 1usize..20, gamma in 0.05f64..1.0) {
        for e in 0..100 {
            let now = step_lr(e, base, step, gamma);
            let next = step_lr(e + 1, base, step, gamma);
            prop_assert!(next <= now);
            if (e + 1) % step != 0 {
                prop_assert_eq!(now, next);
            }
        }
        prop_assert_eq!(step_lr(step - 1, base, step, gamma), base);
    }

    #[test]
    fn corrupt_bytes_never_panic(bytes in prop::collection::vec(any::<u8>(), 0..200)) {
        let mut framed = b"QTLC\x01\x00\x00\x00".to_vec();
        framed.extend_from_slice(&bytes);
        for b in [&bytes[..], &framed[..]] {
            if let Err(e) = decode(b) {
                prop_assert_eq!(e.exit_code(), 2);
            }
        }
    }
}

proptest! {
    #![proptest_config(cases(48))]

    #[test]
    fn statevector_stays_normalized(n in 3usize..=6, reps in 2usize..=4, seed in any::<u64>()) {
        let c = build_ansatz(n, reps).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p: Vec<f64> = (0..c.n_params()).map(|_| rand::Rng::gen_range(&mut rng, -6.0..6.0)).collect();
        let mut s = StateVector::zero(n);
        for g in c.gates() {
            s.apply_gate(g, &p);
            prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn noisy_expectations_respect_the_bound(
        n in 3usize..=5,
        reps in 2usize..=3,
        r1 in 0.0f64..0.05,
        r2 in 0.0f64..0.1,
        seed in any::<u64>(),
    ) {
        let c = build_ansatz(n, reps).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p: Vec<f64> = (0..c.n_params()).map(|_| rand::Rng::gen_range(&mut rng, -3.2..3.2)).collect();
        let noise = NoiseModel::new(r1, r2).unwrap();
        let rho = simulate_noisy(&c, &p, &noise).unwrap();
        rho.check_invariants().unwrap();
        let ideal = expectations(&c, &p).unwrap();
        let (g1, g2) = c.gate_counts();
        let bound = noise.deviation_bound(g1, g2) + 1e-9;
        for (w, z) in ideal.iter().enumerate() {
            prop_assert!((rho.expect_z(w) - z).abs() <= bound);
        }
    }

    #[test]
    fn adam_keeps_weights_on_the_f32_grid(values in prop::collection::vec(-10.0f64..10.0, 1..20), lr in 1e-5f64..1e-1) {
        let mut ps = ParameterSet::new();
        let id = ps.register("w", Tensor::new(vec![values.len()], values.clone()).unwrap()).unwrap();
        let mut tape = Tape::new();
        let w = tape.param(&ps, id);
        let loss = tape.weighted_sum(w, &values).unwrap();
        tape.backward(loss, &mut ps).unwrap();
        let mut adam = Adam::default();
        adam.step(&mut ps, lr).unwrap();
        prop_assert_eq!(adam.steps(), 1);
        for &v in ps.value(id).data() {
            prop_assert_eq!(v, to_f32_grid(v));
        }
    }
}

fn tagged(acc: f64, n: usize, reps: usize) -> ExperimentResult {
    let metrics = MetricsReport {
        model_tag: format!("qtl-{n}q{reps}r"),
        backend_tag: BackendTag::Ideal,
        accuracy: acc,
        precision: 0.0,
        recall: 0.0,
        f1: 0.0,
        auc: 0.5,
        counts: ConfusionCounts::default(),
    };
    ExperimentResult {
        record: ResultRecord {
            config: RunTag {
                model: "qtl".into(),
                n_qubits: Some(n),
                reps: Some(reps),
                seed: 0,
                backend: Backend::Ideal,
            },
            metrics,
            noisy_metrics: None,
            loss_curve: vec![],
            final_train_loss: 0.0,
            completed: true,
        },
        wall_clock_seconds: 0.0,
    }
}

#[test]
fn best_cell_prefers_the_earliest_tie() {
    let results = vec![
        tagged(0.8, 3, 2),
        tagged(0.9, 4, 3),
        tagged(0.9, 6, 4),
        tagged(0.7, 7, 2),
    ];
    assert_eq!(best_cell(&results), Some((4, 3)));
    assert_eq!(best_cell(&[]), None);
}

#[test]
fn head_swap_keeps_features_identical() {
    let baseline = build_baseline(5).unwrap();
    let frozen = Arc::new(baseline.freeze().unwrap());
    let images = qtl::data::synth_generate(
        &qtl::data::SynthConfig {
            n_patients: 4,
            images_per_patient: 2,
            seed: 1,
            signal_strength: 0.3,
        },
        None,
    )
    .unwrap();
    let data = Examples::from_images(&images).unwrap();
    let before = frozen.extract(&data.tensor_all().unwrap()).unwrap();
    let cfg = TrainConfig {
        lr: 1e-2,
        batch_size: 4,
        epochs: 3,
        ..TrainConfig::default()
    };
    let mut ctl = make_ctl_head(frozen.clone(), 1).unwrap();
    let mut qtl = make_qtl_model(frozen.clone(), 3, 2, 1).unwrap();
    train(&mut ctl, &data, &cfg, &Backend::Ideal).unwrap();
    train(&mut qtl, &data, &cfg, &Backend::Ideal).unwrap();
    for m in [&ctl.features, &qtl.features] {
        assert_eq!(m.extract(&data.tensor_all().unwrap()).unwrap(), before);
        assert!(m.params().iter().all(|p| p.grad.is_none()));
    }
}

#[test]
fn checkpoints_resave_identically() {
    let frozen = Arc::new(build_baseline(8).unwrap().freeze().unwrap());
    let mut qtl = make_qtl_model(frozen, 4, 2, 3).unwrap();
    let id = qtl.head.theta_id().unwrap();
    qtl.head.params_mut().value_mut(id).data_mut()[0] = to_f32_grid(0.123456789);
    let model = Model::Qtl(qtl);
    let bytes = model.to_bytes().unwrap();
    let again = Model::from_bytes(&bytes).unwrap().to_bytes().unwrap();
    assert_eq!(bytes, again);
    let net = DressedQuantumNet::new(2304, 4, 2, 3).unwrap();
    assert_eq!(net.params().len(), 5);
}
