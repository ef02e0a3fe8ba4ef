//! Central finite differences against the tape's reverse sweep.
//!
//! Zero-initialized biases put some ReLU inputs exactly on the kink, where
//! one-sided slopes differ, so the weights are jittered before checking.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spectral_ser::gradcheck::{check_model, DEFAULT_STEP};
use spectral_ser::model::{ConvMode, ModelConfig, ModelParams};
use spectral_ser::tensor::{PoolMode, Tensor};

fn main() -> spectral_ser::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for mode in [ConvMode::MlpKernel, ConvMode::LinearKernel, ConvMode::DiagonalGain] {
        for pooling in [PoolMode::Sum, PoolMode::Mean, PoolMode::Max] {
            let cfg = ModelConfig {
                nodes: 6,
                conv_mode: mode,
                pooling,
                input_dim: 3,
                conv1_hidden: 4,
                conv1_out: 4,
                conv2_hidden: 4,
                embedding_dim: 5,
                num_classes: 2,
                ..ModelConfig::default()
            };
            let mut model = ModelParams::init(cfg, &mut rng)?;
            for t in model.tensors_mut() {
                t.data_mut().iter_mut().for_each(|v| *v += rng.random_range(-0.3..0.3));
            }
            let xs: Vec<Tensor> = (0..3).map(|_| Tensor::from_fn(6, 3, |_, _| rng.random_range(-1.0..1.0))).collect();
            let refs: Vec<&Tensor> = xs.iter().collect();
            let r = check_model(&model, &refs, &[0, 1, 0], DEFAULT_STEP)?;
            println!(
                "{:<9} {:<5} {:>4} params  max rel {:.2e}  max abs {:.2e}",
                mode.to_string(),
                format!("{pooling:?}"),
                r.checked,
                r.max_rel_error,
                r.max_abs_error
            );
        }
    }
    Ok(())
}
