//! Frame-level descriptors for a pure tone, then the padded node matrix.

use spectral_ser::features::{extract_features, frame, lld_names, sine_wave, FrameConfig, LldExtractor};

fn main() -> spectral_ser::Result<()> {
    let cfg = FrameConfig::default();
    let wave = sine_wave(200.0, 0.5, 1.0, 16_000);
    let frames = frame(&wave, &cfg)?;
    let extractor = LldExtractor::new(&cfg, wave.sample_rate())?;
    let first = extractor.lld_vector(frames[0])?;
    println!("{} frames of {} samples", frames.len(), frames[0].len());
    for (name, v) in lld_names().iter().zip(first).take(6) {
        println!("  {name:<12} {v:>10.4}");
    }

    let m = extract_features(&wave, &cfg, 120, None)?;
    let padding = (m.frames..m.nodes())
        .filter(|&r| m.values.row(r).iter().all(|&v| v == 0.0))
        .count();
    println!(
        "node matrix {}x{}, {} real frames, {padding} zero rows",
        m.nodes(),
        m.dim(),
        m.frames
    );
    println!("columns: {} ... {}", m.names[0], m.names[m.dim() - 1]);
    Ok(())
}
