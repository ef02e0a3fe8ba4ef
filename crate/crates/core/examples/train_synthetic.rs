//! Train on the synthetic corpus, save a checkpoint, reload it and evaluate.
//!
//! `cargo run --release --example train_synthetic -- [epochs]`

use spectral_ser::config::RunConfig;
use spectral_ser::pipeline;

fn main() -> spectral_ser::Result<()> {
    let mut config = RunConfig::default();
    config.train.epochs = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(40);
    config.synthetic_per_class = 20;
    let dir = std::env::temp_dir().join("spectral-ser-train-example");
    let mut log = |line: &str| println!("{line}");

    let manifest = pipeline::gen_synthetic(&config, &dir.join("data"), true, &mut log)?;
    let report = pipeline::train(&config, &manifest, &dir.join("model"), true, &mut log)?;
    println!("{} parameters -> {}", report.parameter_count, report.checkpoint.display());

    let metrics = pipeline::evaluate(&config, &report.checkpoint, &manifest, &dir.join("eval"), &mut log)?;
    println!("training-set WA {:.4}  UA {:.4}", metrics.wa, metrics.ua);
    Ok(())
}
