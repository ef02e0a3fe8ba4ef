//! Sum, mean and max readouts under the same cross-validation protocol.
//!
//! `cargo run --release --example pooling_ablation -- [epochs]`

use spectral_ser::config::RunConfig;
use spectral_ser::pipeline::{self, Dataset};

fn main() -> spectral_ser::Result<()> {
    let mut config = RunConfig::default();
    config.train.epochs = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20);
    config.folds = 3;
    config.synthetic_per_class = 15;
    let dir = std::env::temp_dir().join("spectral-ser-pooling-example");
    let manifest = pipeline::gen_synthetic(&config, &dir, true, &mut |_| {})?;
    let data = Dataset::load(&manifest)?;
    let (_, table) = pipeline::pooling_ablation(&config, &data, &mut |line| eprintln!("{line}"))?;
    print!("{table}");
    Ok(())
}
