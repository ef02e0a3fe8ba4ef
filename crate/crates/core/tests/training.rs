use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use spectral_ser::checkpoint::Checkpoint;
use spectral_ser::data::{compute_metrics, generate_synthetic_corpus, SyntheticSpec};
use spectral_ser::features::FrameConfig;
use spectral_ser::model::{ConvMode, ModelConfig, ModelParams};
use spectral_ser::optim::{predict_labels, train, train_with, LabeledSet, TrainConfig};
use spectral_ser::spectral::{basis_for, GraphSpec, LaplacianKind};
use spectral_ser::tensor::{PoolMode, Tensor};
use spectral_ser::Error;

fn small_config(nodes: usize, input_dim: usize, classes: usize) -> ModelConfig {
    ModelConfig {
        nodes,
        input_dim,
        conv1_hidden: 8,
        conv1_out: 8,
        conv2_hidden: 8,
        embedding_dim: 6,
        num_classes: classes,
        ..ModelConfig::default()
    }
}

fn small_corpus(noise: f64, seed: u64) -> (SyntheticSpec, Vec<Tensor>, Vec<usize>) {
    let spec = SyntheticSpec {
        per_class: 10,
        nodes: 16,
        features: 4,
        classes: 3,
        noise,
        seed,
    };
    let c = generate_synthetic_corpus(&spec).unwrap();
    (spec, c.features, c.labels)
}

fn bits(model: &ModelParams) -> Vec<u64> {
    model
        .tensors()
        .iter()
        .flat_map(|t| t.data().iter().map(|v| v.to_bits()))
        .collect()
}

#[test]
fn two_sample_toy_is_learned() {
    let a = Tensor::from_fn(6, 3, |r, c| if c == 0 { 1.0 + r as f64 * 0.1 } else { 0.0 });
    let b = Tensor::from_fn(6, 3, |r, c| if c == 1 { -1.0 - r as f64 * 0.1 } else { 0.0 });
    let mut model = ModelParams::init(small_config(6, 3, 2), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let set = LabeledSet::new(vec![&a, &b], vec![0, 1]);
    let cfg = TrainConfig {
        epochs: 50,
        ..TrainConfig::default()
    };
    let log = train(&mut model, &set, &cfg).unwrap();
    assert_eq!(log.len(), 50);
    assert_eq!(predict_labels(&model, &[&a, &b], 8).unwrap(), vec![0, 1]);
    assert_eq!(log.last().unwrap().train_wa, 1.0);
}

#[test]
fn zero_epochs_leave_the_initialization() {
    let (_, xs, ys) = small_corpus(0.1, 0);
    let init = ModelParams::init(small_config(16, 4, 3), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let mut model = init.clone();
    let set = LabeledSet::new(xs.iter().collect(), ys);
    let cfg = TrainConfig {
        epochs: 0,
        ..TrainConfig::default()
    };
    assert!(train(&mut model, &set, &cfg).unwrap().is_empty());
    assert_eq!(bits(&model), bits(&init));
}

#[test]
fn same_seed_same_run() {
    let (_, xs, ys) = small_corpus(0.1, 2);
    let set = LabeledSet::new(xs.iter().collect(), ys);
    let cfg = TrainConfig {
        epochs: 4,
        batch_size: 7,
        seed: 9,
        ..TrainConfig::default()
    };
    let run = || {
        let mut m = ModelParams::init(small_config(16, 4, 3), &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let log = train(&mut m, &set, &cfg).unwrap();
        (bits(&m), log)
    };
    let (w1, l1) = run();
    let (w2, l2) = run();
    assert_eq!(w1, w2);
    assert_eq!(l1, l2);
    let other = TrainConfig { seed: 10, ..cfg.clone() };
    let mut m = ModelParams::init(small_config(16, 4, 3), &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    train(&mut m, &set, &other).unwrap();
    assert_ne!(bits(&m), w1, "shuffle order should depend on the seed");
}

#[test]
fn loss_drops_within_ten_epochs() {
    let (_, xs, ys) = small_corpus(0.1, 3);
    let refs: Vec<&Tensor> = xs.iter().collect();
    let mut model = ModelParams::init(small_config(16, 4, 3), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    let initial = model.loss_and_gradients(&refs, &ys).unwrap().loss;
    let set = LabeledSet::new(refs.clone(), ys.clone());
    let cfg = TrainConfig {
        epochs: 10,
        ..TrainConfig::default()
    };
    train(&mut model, &set, &cfg).unwrap();
    let after = model.loss_and_gradients(&refs, &ys).unwrap().loss;
    assert!(after < initial, "{after} !< {initial}");
}

#[test]
fn validation_metrics_are_logged() {
    let (_, xs, ys) = small_corpus(0.1, 4);
    let train_set = LabeledSet::new(xs.iter().step_by(2).collect(), ys.iter().step_by(2).cloned().collect());
    let val_set = LabeledSet::new(xs.iter().skip(1).step_by(2).collect(), ys.iter().skip(1).step_by(2).cloned().collect());
    let mut model = ModelParams::init(small_config(16, 4, 3), &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
    let cfg = TrainConfig {
        epochs: 3,
        ..TrainConfig::default()
    };
    let mut seen = 0;
    let log = train_with(&mut model, &train_set, &cfg, Some(&val_set), |_| seen += 1).unwrap();
    assert_eq!(seen, 3);
    assert!(log.iter().all(|r| r.val_wa.is_some() && r.val_ua.is_some()));
    assert_eq!(log[0].to_string().split(',').count(), 6);
}

#[test]
fn inconsistent_shapes_fail_before_training() {
    let a = Tensor::zeros(6, 3);
    let b = Tensor::zeros(6, 4);
    let mut model = ModelParams::init(small_config(6, 3, 2), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let init = bits(&model);
    let err = train(&mut model, &LabeledSet::new(vec![&a, &b], vec![0, 1]), &TrainConfig::default()).unwrap_err();
    assert!(matches!(err, Error::Data(_)), "{err}");
    assert_eq!(bits(&model), init);
}

#[test]
fn non_finite_loss_reports_epoch_and_step() {
    let a = Tensor::filled(6, 3, 1e308);
    let b = Tensor::filled(6, 3, -1e308);
    let mut model = ModelParams::init(small_config(6, 3, 2), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let cfg = TrainConfig {
        epochs: 2,
        batch_size: 1,
        ..TrainConfig::default()
    };
    let err = train(&mut model, &LabeledSet::new(vec![&a, &b], vec![0, 1]), &cfg).unwrap_err();
    match err {
        Error::Training { epoch, step, .. } => assert_eq!((epoch, step), (0, 0)),
        other => panic!("expected a training error, got {other}"),
    }
}

/// Nearest class centroid in the graph Fourier domain. At zero noise every
/// sample equals its class template, so this oracle must be perfect.
#[test]
fn noiseless_corpus_is_separable_by_spectral_centroids() {
    let spec = SyntheticSpec {
        per_class: 5,
        noise: 0.0,
        ..SyntheticSpec::default()
    };
    let c = generate_synthetic_corpus(&spec).unwrap();
    let basis = basis_for(&GraphSpec::cycle(spec.nodes).unwrap(), LaplacianKind::Combinatorial).unwrap();
    let spectra: Vec<Tensor> = c.features.iter().map(|x| basis.gft(x).unwrap()).collect();
    let mut centroids = vec![Tensor::zeros(spec.nodes, spec.features); spec.classes];
    for (s, &y) in spectra.iter().zip(&c.labels) {
        centroids[y] = centroids[y].add(&s.scale(1.0 / spec.per_class as f64)).unwrap();
    }
    let preds: Vec<usize> = spectra
        .iter()
        .map(|s| {
            (0..spec.classes)
                .min_by(|&a, &b| {
                    let da = s.sub(&centroids[a]).unwrap().frobenius_norm();
                    let db = s.sub(&centroids[b]).unwrap().frobenius_norm();
                    da.total_cmp(&db)
                })
                .unwrap()
        })
        .collect();
    let m = compute_metrics(&preds, &c.labels, spec.classes).unwrap();
    assert_eq!(m.wa, 1.0);
    assert_eq!(m.ua, 1.0);
}

#[test]
fn checkpoint_reload_reproduces_outputs() {
    let (_, xs, _) = small_corpus(0.1, 5);
    let refs: Vec<&Tensor> = xs.iter().collect();
    for mode in [ConvMode::MlpKernel, ConvMode::LinearKernel, ConvMode::DiagonalGain] {
        for pooling in [PoolMode::Sum, PoolMode::Max] {
            let cfg = ModelConfig {
                conv_mode: mode,
                pooling,
                ..small_config(16, 4, 3)
            };
            let model = ModelParams::init(cfg, &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
            let labels: Vec<String> = ["x", "y", "z"].map(String::from).to_vec();
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("m.json");
            Checkpoint::new(&model, &FrameConfig::default(), false, &labels).unwrap().save(&path).unwrap();
            let back = Checkpoint::load(&path).unwrap().to_model().unwrap();
            assert_eq!(back.parameter_count(), model.parameter_count());
            let a = model.logits(&refs).unwrap();
            let b = back.logits(&refs).unwrap();
            let to_bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(to_bits(&a), to_bits(&b));
        }
    }
}

#[test]
fn default_parameter_budget() {
    let model = ModelParams::init(ModelConfig::default(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    assert_eq!(model.parameter_count(), 35_744);
    let linear = ModelConfig {
        conv_mode: ConvMode::LinearKernel,
        ..ModelConfig::default()
    };
    let linear = ModelParams::init(linear, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    assert_eq!(linear.parameter_count(), 35 * 110 + 110 * 64 + 64 * 4 + 4);
}
