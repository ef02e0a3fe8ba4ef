use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spectral_ser::gradcheck::{check_model, check_tape_function, DEFAULT_STEP};
use spectral_ser::model::{ConvMode, ModelConfig, ModelParams};
use spectral_ser::spectral::{basis_for, GraphSpec, LaplacianKind, Topology};
use spectral_ser::tensor::{PoolMode, Tape, Tensor};

const TOL: f64 = 1e-5;

fn uniform(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

fn small_config(topology: Topology, laplacian: LaplacianKind, mode: ConvMode, pooling: PoolMode) -> ModelConfig {
    ModelConfig {
        topology,
        nodes: 6,
        laplacian,
        conv_mode: mode,
        pooling,
        input_dim: 3,
        conv1_hidden: 4,
        conv1_out: 4,
        conv2_hidden: 4,
        embedding_dim: 5,
        num_classes: 2,
    }
}

#[test]
fn every_mode_and_pooling_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for topology in [Topology::Cycle, Topology::Line] {
        for laplacian in [LaplacianKind::Combinatorial, LaplacianKind::Normalized] {
            for mode in [ConvMode::MlpKernel, ConvMode::LinearKernel, ConvMode::DiagonalGain] {
                for pooling in [PoolMode::Sum, PoolMode::Mean, PoolMode::Max] {
                    let cfg = small_config(topology, laplacian, mode, pooling);
                    let mut model = ModelParams::init(cfg, &mut rng).unwrap();
                    // nonzero biases and non-unit gains exercise every path
                    for t in model.tensors_mut() {
                        for v in t.data_mut() {
                            *v += rng.random_range(-0.3..0.3);
                        }
                    }
                    let xs: Vec<Tensor> = (0..3).map(|_| uniform(6, 3, &mut rng)).collect();
                    let refs: Vec<&Tensor> = xs.iter().collect();
                    let report = check_model(&model, &refs, &[0, 1, 1], DEFAULT_STEP).unwrap();
                    assert_eq!(report.checked, model.parameter_count());
                    assert!(
                        report.max_rel_error < TOL,
                        "{topology} {laplacian} {mode} {pooling:?}: {report:?}"
                    );
                }
            }
        }
    }
}

#[test]
fn each_op_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a = uniform(4, 3, &mut rng);
    let b = uniform(3, 5, &mut rng);
    let bias = uniform(1, 5, &mut rng);
    let same = uniform(4, 3, &mut rng);
    let u = Arc::new(basis_for(&GraphSpec::cycle(4).unwrap(), LaplacianKind::Combinatorial).unwrap().u().clone());
    let gains = uniform(4, 1, &mut rng);
    let weights = uniform(3, 1, &mut rng);

    let matmul = check_tape_function(&[a.clone(), b.clone()], DEFAULT_STEP, |t, v| {
        let z = t.matmul(v[0], v[1])?;
        let z = t.hadamard(z, z)?;
        Ok(t.sum_all(z))
    })
    .unwrap();
    let bias_relu = check_tape_function(&[a.clone(), b.clone(), bias], DEFAULT_STEP, |t, v| {
        let z = t.matmul(v[0], v[1])?;
        let z = t.add_bias(z, v[2])?;
        let z = t.relu(z);
        let z = t.hadamard(z, z)?;
        Ok(t.sum_all(z))
    })
    .unwrap();
    let affine = check_tape_function(&[a.clone(), b.clone(), uniform(1, 5, &mut rng)], DEFAULT_STEP, |t, v| {
        let z = t.affine(v[0], v[1], v[2])?;
        let z = t.hadamard(z, z)?;
        Ok(t.sum_all(z))
    })
    .unwrap();
    let add = check_tape_function(&[a.clone(), same.clone()], DEFAULT_STEP, |t, v| {
        let z = t.add(v[0], v[1])?;
        let z = t.hadamard(z, v[0])?;
        Ok(t.sum_all(z))
    })
    .unwrap();
    let block = check_tape_function(&[a.clone(), same.clone()], DEFAULT_STEP, |t, v| {
        let z = t.block_left_mul(&u, true, v[0], 4)?;
        let z = t.block_left_mul(&u, false, z, 4)?;
        let z = t.hadamard(z, v[1])?;
        let z = t.hadamard(z, z)?;
        Ok(t.sum_all(z))
    })
    .unwrap();
    let scale = check_tape_function(&[a.clone(), gains], DEFAULT_STEP, |t, v| {
        let z = t.scale_rows(v[0], v[1], 4)?;
        let z = t.hadamard(z, z)?;
        Ok(t.sum_all(z))
    })
    .unwrap();
    let mut pools = Vec::new();
    for mode in [PoolMode::Sum, PoolMode::Mean, PoolMode::Max] {
        let stacked = uniform(8, 3, &mut rng);
        pools.push(
            check_tape_function(&[stacked, weights.clone()], DEFAULT_STEP, |t, v| {
                let p = t.pool(v[0], mode, 4)?;
                let z = t.matmul(p, v[1])?;
                let z = t.hadamard(z, z)?;
                Ok(t.sum_all(z))
            })
            .unwrap(),
        );
    }
    let ce = check_tape_function(&[uniform(3, 4, &mut rng)], DEFAULT_STEP, |t, v| {
        let targets = Tensor::from_rows(&[[0.0, 1.0, 0.0, 0.0], [1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 1.0]]);
        t.cross_entropy(v[0], &targets)
    })
    .unwrap();

    for (name, r) in [
        ("matmul", &matmul),
        ("bias+relu", &bias_relu),
        ("affine", &affine),
        ("add", &add),
        ("block_left_mul", &block),
        ("scale_rows", &scale),
        ("sum pool", &pools[0]),
        ("mean pool", &pools[1]),
        ("max pool", &pools[2]),
        ("cross_entropy", &ce),
    ] {
        assert!(r.max_rel_error < TOL, "{name}: {r:?}");
    }
}

#[test]
fn random_three_layer_net() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let params = vec![
        uniform(6, 5, &mut rng),
        uniform(1, 5, &mut rng),
        uniform(5, 4, &mut rng),
        uniform(1, 4, &mut rng),
        uniform(4, 3, &mut rng),
        uniform(1, 3, &mut rng),
    ];
    let x = uniform(7, 6, &mut rng);
    let targets = Tensor::from_fn(7, 3, |r, c| if r % 3 == c { 1.0 } else { 0.0 });
    let report = check_tape_function(&params, DEFAULT_STEP, |t, v| {
        let input = t.constant(x.clone());
        let mut h = input;
        for layer in 0..3 {
            h = t.matmul(h, v[2 * layer])?;
            h = t.add_bias(h, v[2 * layer + 1])?;
            if layer < 2 {
                h = t.relu(h);
            }
        }
        t.cross_entropy(h, &targets)
    })
    .unwrap();
    assert!(report.max_rel_error < TOL, "{report:?}");
}

#[test]
fn fan_out_sums_branch_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let w = uniform(3, 3, &mut rng);
    let c1 = uniform(3, 3, &mut rng);
    let c2 = uniform(3, 3, &mut rng);

    // w feeds two branches
    let mut tape = Tape::new();
    let wv = tape.param(w.clone());
    let a = tape.constant(c1.clone());
    let b = tape.constant(c2.clone());
    let left = tape.matmul(wv, a).unwrap();
    let right = tape.hadamard(wv, b).unwrap();
    let both = tape.add(left, right).unwrap();
    let loss = tape.sum_all(both);
    let g_shared = tape.backward(loss).unwrap().get(wv).unwrap().clone();

    // the same function with w duplicated into two independent leaves
    let mut tape = Tape::new();
    let w1 = tape.param(w.clone());
    let w2 = tape.param(w);
    let a = tape.constant(c1);
    let b = tape.constant(c2);
    let left = tape.matmul(w1, a).unwrap();
    let right = tape.hadamard(w2, b).unwrap();
    let both = tape.add(left, right).unwrap();
    let loss = tape.sum_all(both);
    let grads = tape.backward(loss).unwrap();
    let summed = grads.get(w1).unwrap().add(grads.get(w2).unwrap()).unwrap();

    assert!(g_shared.max_abs_diff(&summed) < 1e-15);
}
