//! Stratified k-fold cross-validation on the synthetic corpus.
//!
//! `cargo run --release --example crossval_synthetic -- [epochs] [folds]`

use spectral_ser::config::RunConfig;
use spectral_ser::pipeline::{self, Dataset};

fn main() -> spectral_ser::Result<()> {
    let mut args = std::env::args().skip(1).map(|s| s.parse::<usize>().ok());
    let mut config = RunConfig::default();
    config.train.epochs = args.next().flatten().unwrap_or(30);
    config.folds = args.next().flatten().unwrap_or(5);
    let dir = std::env::temp_dir().join("spectral-ser-crossval-example");
    let manifest = pipeline::gen_synthetic(&config, &dir, true, &mut |_| {})?;
    let data = Dataset::load(&manifest)?;
    println!("{} utterances, {} classes, {}x{} each", data.len(), data.labels.len(), data.nodes(), data.dim());
    let report = pipeline::crossval_dataset(&config, &data, &mut |line| eprintln!("{line}"))?;
    print!("{}", report.to_csv());
    Ok(())
}
