//! Frame-level acoustic descriptors.
//!
//! Each 25 ms frame (10 ms hop) yields 17 low-level descriptors:
//! zero-crossing rate, RMS energy, F0, voicing probability and MFCC 0–12.
//! The sequence is smoothed with a centered moving average, first-order deltas
//! are taken of the smoothed values, and the `[smoothed ‖ delta]` rows are
//! padded or cut to a fixed node count. This approximates the IS09 LLD set; it
//! is not bit-compatible with openSMILE.

use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const LLD_COUNT: usize = 17;

/// Mono audio samples.
#[derive(Clone, Debug, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::Data("sample rate must be positive".into()));
        }
        if samples.is_empty() {
            return Err(Error::Data("waveform has no samples".into()));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite() || v.abs() > 1.0) {
            return Err(Error::Data(format!(
                "sample {i} = {} is outside [-1, 1]",
                samples[i]
            )));
        }
        Ok(Waveform {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// Reads a mono PCM (8–32 bit integer) or IEEE float WAV file.
pub fn read_wav(path: &Path) -> Result<Waveform> {
    let mut reader = hound::WavReader::open(path)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::Data(format!(
            "{}: expected mono audio, found {} channels",
            path.display(),
            spec.channels
        )));
    }
    let bad = |e: hound::Error| Error::Data(format!("{}: {e}", path.display()));
    let samples: Vec<f64> = match spec.sample_format {
        hound::SampleFormat::Float => reader
            .samples::<f32>()
            .map(|s| s.map(|v| (v as f64).clamp(-1.0, 1.0)))
            .collect::<std::result::Result<_, _>>()
            .map_err(bad)?,
        hound::SampleFormat::Int => {
            let scale = (1i64 << (spec.bits_per_sample - 1)) as f64;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| (v as f64 / scale).clamp(-1.0, 1.0)))
                .collect::<std::result::Result<_, _>>()
                .map_err(bad)?
        }
    };
    Waveform::new(samples, spec.sample_rate)
}

/// Writes 16-bit mono PCM.
pub fn write_wav(path: &Path, wave: &Waveform) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: wave.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let bad = |e: hound::Error| Error::Data(format!("{}: {e}", path.display()));
    let mut writer = hound::WavWriter::create(path, spec).map_err(bad)?;
    for &s in &wave.samples {
        writer
            .write_sample((s * i16::MAX as f64).round() as i16)
            .map_err(bad)?;
    }
    writer.finalize().map_err(bad)
}

/// What to do with utterances that have more frames than nodes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LengthPolicy {
    /// Keep the first `M` frames.
    #[default]
    Truncate,
    /// Keep `M` frames spread evenly over the utterance.
    Subsample,
}

impl std::str::FromStr for LengthPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "truncate" => Ok(LengthPolicy::Truncate),
            "subsample" => Ok(LengthPolicy::Subsample),
            other => Err(Error::Domain(format!("unknown length policy '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameConfig {
    pub window_ms: f64,
    pub stride_ms: f64,
    pub smoothing_window: usize,
    pub mel_filters: usize,
    pub mfcc_count: usize,
    pub f0_min_hz: f64,
    pub f0_max_hz: f64,
    /// F0 is reported as 0 below this voicing probability.
    pub voicing_threshold: f64,
    pub length_policy: LengthPolicy,
}

impl Default for FrameConfig {
    fn default() -> Self {
        FrameConfig {
            window_ms: 25.0,
            stride_ms: 10.0,
            smoothing_window: 3,
            mel_filters: 26,
            mfcc_count: 13,
            f0_min_hz: 50.0,
            f0_max_hz: 500.0,
            voicing_threshold: 0.3,
            length_policy: LengthPolicy::Truncate,
        }
    }
}

impl FrameConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.window_ms > 0.0 && self.stride_ms > 0.0 && self.window_ms >= self.stride_ms) {
            return Err(Error::Config(format!(
                "need window_ms >= stride_ms > 0, got {} / {}",
                self.window_ms, self.stride_ms
            )));
        }
        if self.mfcc_count > self.mel_filters || self.mel_filters == 0 {
            return Err(Error::Config(format!(
                "mfcc_count {} must not exceed mel_filters {}",
                self.mfcc_count, self.mel_filters
            )));
        }
        if self.mfcc_count + 4 != LLD_COUNT {
            return Err(Error::Config(format!(
                "the descriptor layout expects 13 MFCCs, got {}",
                self.mfcc_count
            )));
        }
        if self.smoothing_window == 0 || self.smoothing_window.is_multiple_of(2) {
            return Err(Error::Config("smoothing_window must be odd".into()));
        }
        if !(self.f0_min_hz > 0.0 && self.f0_min_hz < self.f0_max_hz) {
            return Err(Error::Config("need 0 < f0_min_hz < f0_max_hz".into()));
        }
        Ok(())
    }

    pub fn window_samples(&self, sample_rate: u32) -> usize {
        ((self.window_ms * sample_rate as f64 / 1000.0).round() as usize).max(1)
    }

    pub fn stride_samples(&self, sample_rate: u32) -> usize {
        ((self.stride_ms * sample_rate as f64 / 1000.0).round() as usize).max(1)
    }
}

/// Overlapping frames, `⌊(N − W)/S⌋ + 1` of them, without padding.
pub fn frame<'a>(signal: &'a Waveform, config: &FrameConfig) -> Result<Vec<&'a [f64]>> {
    let w = config.window_samples(signal.sample_rate);
    let s = config.stride_samples(signal.sample_rate);
    let n = signal.samples.len();
    if n < w {
        return Err(Error::Data(format!(
            "signal has {n} samples, at least {w} (one {} ms window) needed",
            config.window_ms
        )));
    }
    let count = (n - w) / s + 1;
    Ok((0..count).map(|i| &signal.samples[i * s..i * s + w]).collect())
}

pub fn lld_names() -> Vec<String> {
    let mut names: Vec<String> = ["zcr", "rms_energy", "f0", "voicing_prob"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    names.extend((0..LLD_COUNT - 4).map(|i| format!("mfcc_{i}")));
    names
}

/// Column names of a feature matrix: smoothed descriptors, their deltas and
/// optionally the spontaneity flag.
pub fn feature_names(spontaneity: bool) -> Vec<String> {
    let base = lld_names();
    let mut names: Vec<String> = base.iter().map(|n| format!("{n}_sma")).collect();
    names.extend(base.iter().map(|n| format!("{n}_sma_de")));
    if spontaneity {
        names.push("spontaneity".into());
    }
    names
}

/// Per-frame descriptor extractor with precomputed window, FFT plan and filterbank.
pub struct LldExtractor {
    config: FrameConfig,
    sample_rate: u32,
    frame_len: usize,
    hamming: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    /// Per filter: (first bin, weights).
    mel_bank: Vec<(usize, Vec<f64>)>,
}

fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

impl LldExtractor {
    pub fn new(config: &FrameConfig, sample_rate: u32) -> Result<Self> {
        config.validate()?;
        if sample_rate == 0 {
            return Err(Error::Data("sample rate must be positive".into()));
        }
        let n = config.window_samples(sample_rate);
        let hamming = (0..n)
            .map(|i| {
                if n == 1 {
                    1.0
                } else {
                    0.54 - 0.46 * (2.0 * PI * i as f64 / (n - 1) as f64).cos()
                }
            })
            .collect();
        let fft = FftPlanner::new().plan_fft_forward(n);

        let bins = n / 2 + 1;
        let nyquist = sample_rate as f64 / 2.0;
        let mel_max = hz_to_mel(nyquist);
        let edges: Vec<f64> = (0..config.mel_filters + 2)
            .map(|i| mel_to_hz(mel_max * i as f64 / (config.mel_filters + 1) as f64))
            .collect();
        let bin_hz = |k: usize| k as f64 * sample_rate as f64 / n as f64;
        let mel_bank = (0..config.mel_filters)
            .map(|f| {
                let (lo, mid, hi) = (edges[f], edges[f + 1], edges[f + 2]);
                let first = (0..bins).find(|&k| bin_hz(k) > lo).unwrap_or(bins);
                let weights = (first..bins)
                    .map(bin_hz)
                    .take_while(|&hz| hz < hi)
                    .map(|hz| {
                        if hz <= mid {
                            (hz - lo) / (mid - lo)
                        } else {
                            (hi - hz) / (hi - mid)
                        }
                    })
                    .collect();
                (first, weights)
            })
            .collect();
        Ok(LldExtractor {
            config: config.clone(),
            sample_rate,
            frame_len: n,
            hamming,
            fft,
            mel_bank,
        })
    }

    pub fn frame_len(&self) -> usize {
        self.frame_len
    }

    /// `[ZCR, RMS energy, F0, voicing, MFCC_0 … MFCC_12]` for one frame.
    pub fn lld_vector(&self, frame: &[f64]) -> Result<[f64; LLD_COUNT]> {
        if frame.len() != self.frame_len {
            return Err(Error::Data(format!(
                "frame has {} samples, extractor expects {}",
                frame.len(),
                self.frame_len
            )));
        }
        let mut out = [0.0; LLD_COUNT];
        out[0] = zero_crossing_rate(frame);
        out[1] = rms(frame);
        let (f0, voicing) = self.pitch(frame);
        out[2] = f0;
        out[3] = voicing;
        if out[1] > 0.0 {
            out[4..].copy_from_slice(&self.mfcc(frame));
        }
        Ok(out)
    }

    /// Normalized autocorrelation peak search over the configured F0 lag range.
    fn pitch(&self, frame: &[f64]) -> (f64, f64) {
        let n = frame.len();
        let mean = frame.iter().sum::<f64>() / n as f64;
        let x: Vec<f64> = frame.iter().map(|v| v - mean).collect();
        let sr = self.sample_rate as f64;
        let lag_min = ((sr / self.config.f0_max_hz).floor() as usize).max(1);
        let lag_max = ((sr / self.config.f0_min_hz).ceil() as usize).min(n.saturating_sub(2));
        if lag_min + 2 > lag_max {
            return (0.0, 0.0);
        }
        let corr = |lag: usize| {
            let (a, b) = (&x[..n - lag], &x[lag..]);
            let dot: f64 = a.iter().zip(b).map(|(p, q)| p * q).sum();
            let ea: f64 = a.iter().map(|v| v * v).sum();
            let eb: f64 = b.iter().map(|v| v * v).sum();
            let denom = (ea * eb).sqrt();
            if denom > 0.0 {
                dot / denom
            } else {
                0.0
            }
        };
        // r[i] holds the correlation at lag `lag_min - 1 + i`.
        let r: Vec<f64> = (lag_min - 1..=lag_max + 1).map(corr).collect();
        let peaks: Vec<usize> = (1..r.len() - 1)
            .filter(|&i| r[i] > 0.0 && r[i] >= r[i - 1] && r[i] >= r[i + 1])
            .collect();
        let Some(best) = peaks.iter().map(|&i| r[i]).reduce(f64::max) else {
            return (0.0, 0.0);
        };
        // Earliest peak close to the best one, which avoids octave errors.
        let i = *peaks.iter().find(|&&i| r[i] >= 0.9 * best).expect("best is a peak");
        let voicing = r[i].clamp(0.0, 1.0);
        if voicing < self.config.voicing_threshold {
            return (0.0, voicing);
        }
        let (a, b, c) = (r[i - 1], r[i], r[i + 1]);
        let curvature = a - 2.0 * b + c;
        let shift = if curvature < 0.0 {
            (0.5 * (a - c) / curvature).clamp(-0.5, 0.5)
        } else {
            0.0
        };
        let lag = (lag_min - 1 + i) as f64 + shift;
        (sr / lag, voicing)
    }

    fn mfcc(&self, frame: &[f64]) -> Vec<f64> {
        let mut buf: Vec<Complex<f64>> = frame
            .iter()
            .zip(&self.hamming)
            .map(|(v, w)| Complex::new(v * w, 0.0))
            .collect();
        self.fft.process(&mut buf);
        let mag: Vec<f64> = buf[..self.frame_len / 2 + 1].iter().map(|c| c.norm()).collect();
        let log_mel: Vec<f64> = self
            .mel_bank
            .iter()
            .map(|(first, w)| {
                let e: f64 = w.iter().zip(&mag[*first..]).map(|(a, b)| a * b).sum();
                e.max(1e-10).ln()
            })
            .collect();
        let k = log_mel.len() as f64;
        (0..self.config.mfcc_count)
            .map(|j| {
                let scale = if j == 0 { (1.0 / k).sqrt() } else { (2.0 / k).sqrt() };
                scale
                    * log_mel
                        .iter()
                        .enumerate()
                        .map(|(n, e)| e * (PI * j as f64 * (n as f64 + 0.5) / k).cos())
                        .sum::<f64>()
            })
            .collect()
    }
}

/// Fraction of adjacent sample pairs whose signs differ (zero counts as positive).
pub fn zero_crossing_rate(frame: &[f64]) -> f64 {
    if frame.len() < 2 {
        return 0.0;
    }
    let changes = frame
        .windows(2)
        .filter(|w| (w[0] >= 0.0) != (w[1] >= 0.0))
        .count();
    changes as f64 / (frame.len() - 1) as f64
}

pub fn rms(frame: &[f64]) -> f64 {
    if frame.is_empty() {
        return 0.0;
    }
    (frame.iter().map(|v| v * v).sum::<f64>() / frame.len() as f64).sqrt()
}

/// Descriptors of one frame with a freshly built extractor.
pub fn lld_vector(frame: &[f64], sample_rate: u32, config: &FrameConfig) -> Result<[f64; LLD_COUNT]> {
    let cfg = FrameConfig {
        window_ms: frame.len() as f64 * 1000.0 / sample_rate as f64,
        stride_ms: config.stride_ms.min(frame.len() as f64 * 1000.0 / sample_rate as f64),
        ..config.clone()
    };
    LldExtractor::new(&cfg, sample_rate)?.lld_vector(frame)
}

/// Centered moving average (edge samples replicated) followed by the
/// two-point delta `(s[t+1] − s[t−1]) / 2`; returns `[smoothed ‖ delta]` rows.
pub fn smooth_and_delta(sequence: &[Vec<f64>], window: usize) -> Result<Vec<Vec<f64>>> {
    if sequence.is_empty() {
        return Err(Error::Data("cannot smooth an empty sequence".into()));
    }
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::Config("smoothing window must be odd".into()));
    }
    let t_len = sequence.len();
    let width = sequence[0].len();
    if sequence.iter().any(|v| v.len() != width) {
        return Err(Error::Data("ragged descriptor sequence".into()));
    }
    let half = (window / 2) as isize;
    let at = |t: isize| -> &Vec<f64> { &sequence[t.clamp(0, t_len as isize - 1) as usize] };
    let smoothed: Vec<Vec<f64>> = (0..t_len as isize)
        .map(|t| {
            (0..width)
                .map(|f| (-half..=half).map(|o| at(t + o)[f]).sum::<f64>() / window as f64)
                .collect()
        })
        .collect();
    let s_at = |t: isize| -> &Vec<f64> { &smoothed[t.clamp(0, t_len as isize - 1) as usize] };
    Ok((0..t_len as isize)
        .map(|t| {
            let mut row = smoothed[t as usize].clone();
            row.extend((0..width).map(|f| (s_at(t + 1)[f] - s_at(t - 1)[f]) / 2.0));
            row
        })
        .collect())
}

/// `M × P` node features of one utterance.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    pub values: Tensor,
    /// Frames present before padding (or before truncation, capped at `M`).
    pub frames: usize,
    pub names: Vec<String>,
}

impl FeatureMatrix {
    pub fn new(values: Tensor, frames: usize, names: Vec<String>) -> Result<Self> {
        if names.len() != values.cols() {
            return Err(Error::Data(format!(
                "{} feature names for {} columns",
                names.len(),
                values.cols()
            )));
        }
        Ok(FeatureMatrix {
            values,
            frames,
            names,
        })
    }

    pub fn nodes(&self) -> usize {
        self.values.rows()
    }

    pub fn dim(&self) -> usize {
        self.values.cols()
    }
}

/// Pads with zero rows (or shortens) to exactly `nodes` rows and optionally
/// appends a constant spontaneity column. Padding rows stay all-zero.
pub fn to_feature_matrix(
    vectors: &[Vec<f64>],
    nodes: usize,
    spontaneity: Option<bool>,
    policy: LengthPolicy,
) -> Result<FeatureMatrix> {
    if vectors.is_empty() {
        return Err(Error::Data("no frame vectors".into()));
    }
    let width = vectors[0].len();
    if vectors.iter().any(|v| v.len() != width) {
        return Err(Error::Data("ragged frame vectors".into()));
    }
    let names = if width == 2 * LLD_COUNT {
        feature_names(spontaneity.is_some())
    } else {
        let mut n: Vec<String> = (0..width).map(|i| format!("feat_{i:02}")).collect();
        if spontaneity.is_some() {
            n.push("spontaneity".into());
        }
        n
    };
    let p = width + usize::from(spontaneity.is_some());
    let kept: Vec<&Vec<f64>> = if vectors.len() <= nodes {
        vectors.iter().collect()
    } else {
        match policy {
            LengthPolicy::Truncate => vectors[..nodes].iter().collect(),
            LengthPolicy::Subsample => (0..nodes)
                .map(|i| &vectors[i * vectors.len() / nodes])
                .collect(),
        }
    };
    let flag = spontaneity.map(|s| if s { 1.0 } else { 0.0 });
    let mut values = Tensor::zeros(nodes, p);
    for (r, v) in kept.iter().enumerate() {
        let row = values.row_mut(r);
        row[..width].copy_from_slice(v);
        if let Some(f) = flag {
            row[width] = f;
        }
    }
    FeatureMatrix::new(values, kept.len(), names)
}

/// Full pipeline for one utterance.
pub fn extract_features(
    wave: &Waveform,
    config: &FrameConfig,
    nodes: usize,
    spontaneity: Option<bool>,
) -> Result<FeatureMatrix> {
    let extractor = LldExtractor::new(config, wave.sample_rate())?;
    let llds = frame(wave, config)?
        .into_iter()
        .map(|f| extractor.lld_vector(f).map(|v| v.to_vec()))
        .collect::<Result<Vec<_>>>()?;
    let rows = smooth_and_delta(&llds, config.smoothing_window)?;
    to_feature_matrix(&rows, nodes, spontaneity, config.length_policy)
}

pub fn sine_wave(freq_hz: f64, amplitude: f64, secs: f64, sample_rate: u32) -> Waveform {
    let n = (secs * sample_rate as f64).round() as usize;
    let samples = (0..n)
        .map(|i| amplitude * (2.0 * PI * freq_hz * i as f64 / sample_rate as f64).sin())
        .collect();
    Waveform::new(samples, sample_rate).expect("valid sine parameters")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_counts() {
        let cfg = FrameConfig::default();
        let w = Waveform::new(vec![0.0; 16_000], 16_000).unwrap();
        assert_eq!(frame(&w, &cfg).unwrap().len(), 98);
        let w = Waveform::new(vec![0.0; 400], 16_000).unwrap();
        assert_eq!(frame(&w, &cfg).unwrap().len(), 1);
        assert_eq!(cfg.window_samples(8_000), 200);
        let short = Waveform::new(vec![0.0; 399], 16_000).unwrap();
        let err = frame(&short, &cfg).unwrap_err().to_string();
        assert!(err.contains("400"), "{err}");
    }

    #[test]
    fn zcr_and_silence() {
        let alt: Vec<f64> = (0..400).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        assert_eq!(zero_crossing_rate(&alt), 1.0);
        let cfg = FrameConfig::default();
        let v = lld_vector(&[0.0; 400], 16_000, &cfg).unwrap();
        assert_eq!(v[1], 0.0);
        assert_eq!(v[2], 0.0);
        assert_eq!(v[3], 0.0);
        assert!(v.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn sine_pitch() {
        let cfg = FrameConfig::default();
        let wave = sine_wave(200.0, 0.5, 0.025, 16_000);
        let v = lld_vector(wave.samples(), 16_000, &cfg).unwrap();
        assert!((190.0..=210.0).contains(&v[2]), "f0 = {}", v[2]);
        assert!(v[3] > 0.9, "voicing = {}", v[3]);
        assert!((v[1] - 0.5 / 2f64.sqrt()).abs() < 1e-3);
    }

    #[test]
    fn smoothing_examples() {
        let out = smooth_and_delta(&[vec![0.0], vec![1.0], vec![2.0], vec![3.0]], 3).unwrap();
        let smoothed: Vec<f64> = out.iter().map(|r| r[0]).collect();
        let expect = [1.0 / 3.0, 1.0, 2.0, 8.0 / 3.0];
        for (a, b) in smoothed.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((out[1][1] - 5.0 / 6.0).abs() < 1e-15);

        let constant = smooth_and_delta(&vec![vec![4.0, -1.0]; 5], 3).unwrap();
        for row in &constant {
            assert_eq!(row, &vec![4.0, -1.0, 0.0, 0.0]);
        }

        let single = smooth_and_delta(&[vec![2.5]], 3).unwrap();
        assert_eq!(single, vec![vec![2.5, 0.0]]);
    }

    #[test]
    fn padding_truncation_and_spontaneity() {
        let rows: Vec<Vec<f64>> = (0..98).map(|i| vec![i as f64 + 1.0; 34]).collect();
        let fm = to_feature_matrix(&rows, 120, Some(true), LengthPolicy::Truncate).unwrap();
        assert_eq!(fm.values.shape(), (120, 35));
        assert_eq!(fm.frames, 98);
        assert_eq!(fm.names.len(), 35);
        assert_eq!(fm.names[34], "spontaneity");
        for r in 0..98 {
            assert_eq!(fm.values.get(r, 34), 1.0);
        }
        for r in 98..120 {
            assert!(fm.values.row(r).iter().all(|v| *v == 0.0));
        }

        let long: Vec<Vec<f64>> = (0..150).map(|i| vec![i as f64; 34]).collect();
        let fm = to_feature_matrix(&long, 120, None, LengthPolicy::Truncate).unwrap();
        assert_eq!(fm.values.shape(), (120, 34));
        assert_eq!(fm.values.get(119, 0), 119.0);

        let fm = to_feature_matrix(&long, 120, None, LengthPolicy::Subsample).unwrap();
        assert_eq!(fm.values.get(119, 0), (119 * 150 / 120) as f64);
    }

    #[test]
    fn feature_name_layout() {
        let names = feature_names(false);
        assert_eq!(names.len(), 34);
        assert_eq!(names[0], "zcr_sma");
        assert_eq!(names[17], "zcr_sma_de");
        assert_eq!(names[16], "mfcc_12_sma");
    }

    #[test]
    fn config_validation() {
        let bad = FrameConfig {
            window_ms: 5.0,
            ..FrameConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = FrameConfig {
            mfcc_count: 30,
            ..FrameConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn waveform_validation() {
        assert!(Waveform::new(vec![], 16_000).is_err());
        assert!(Waveform::new(vec![0.0], 0).is_err());
        assert!(Waveform::new(vec![1.5], 16_000).is_err());
    }
}
