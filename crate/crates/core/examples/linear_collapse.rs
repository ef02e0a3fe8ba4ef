//! A linear spectral kernel is just a linear layer, and the default model's size.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spectral_ser::model::{conv_forward, ConvMode, ModelConfig, ModelParams, SpectralConvLayer};
use spectral_ser::spectral::{basis_for, GraphSpec, LaplacianKind};
use spectral_ser::tensor::Tensor;

fn main() -> spectral_ser::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let basis = basis_for(&GraphSpec::cycle(120)?, LaplacianKind::Combinatorial)?;
    let w = Tensor::from_fn(34, 16, |_, _| rng.random_range(-1.0..1.0));
    let h = Tensor::from_fn(120, 34, |_, _| rng.random_range(-1.0..1.0));
    let spectral = conv_forward(&SpectralConvLayer::LinearKernel { w: w.clone() }, &basis, &h)?;
    println!("|U (Uᵀ H) W - H W|max = {:.2e}", spectral.max_abs_diff(&h.matmul(&w)?));

    for mode in [ConvMode::MlpKernel, ConvMode::LinearKernel, ConvMode::DiagonalGain] {
        let cfg = ModelConfig {
            conv_mode: mode,
            ..ModelConfig::default()
        };
        let model = ModelParams::init(cfg, &mut rng)?;
        println!("{:<9} {:>6} parameters", mode.to_string(), model.parameter_count());
    }
    Ok(())
}
