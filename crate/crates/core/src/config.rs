//! Run configuration: a flat `key = value` text file.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown and repeated
//! keys are errors. Relative paths are resolved against the directory of the
//! config file. [`RunConfig::render`] prints every key in a fixed order and
//! parses back to the same configuration.
//!
//! ```text
//! # cycle graph, sum pooling
//! topology = cycle
//! nodes = 120
//! pooling = sum
//! epochs = 200
//! manifest = data/manifest.csv
//! ```

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::data::SyntheticSpec;
use crate::error::{Error, Result};
use crate::features::{FrameConfig, LengthPolicy};
use crate::model::{parse_pool_mode, pool_mode_name, ModelConfig};
use crate::optim::TrainConfig;

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    /// `input_dim` and `num_classes` are filled in from the data at run time.
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub folds: usize,
    pub frame: FrameConfig,
    /// Append the spontaneity flag as an extra feature column.
    pub spontaneity: bool,
    pub synthetic_per_class: usize,
    pub synthetic_classes: usize,
    pub synthetic_features: usize,
    pub synthetic_noise: f64,
    pub manifest: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let synthetic = SyntheticSpec::default();
        RunConfig {
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            folds: 5,
            frame: FrameConfig::default(),
            spontaneity: false,
            synthetic_per_class: synthetic.per_class,
            synthetic_classes: synthetic.classes,
            synthetic_features: synthetic.features,
            synthetic_noise: synthetic.noise,
            manifest: None,
            checkpoint: None,
            out_dir: None,
        }
    }
}

pub const CONFIG_KEYS: [&str; 33] = [
    "topology",
    "nodes",
    "laplacian",
    "conv_mode",
    "pooling",
    "conv1_hidden",
    "conv1_out",
    "conv2_hidden",
    "embedding_dim",
    "lr0",
    "decay_factor",
    "decay_every",
    "epochs",
    "batch_size",
    "seed",
    "folds",
    "window_ms",
    "stride_ms",
    "smoothing_window",
    "mel_filters",
    "mfcc_count",
    "f0_min_hz",
    "f0_max_hz",
    "voicing_threshold",
    "length_policy",
    "spontaneity",
    "synthetic_per_class",
    "synthetic_classes",
    "synthetic_features",
    "synthetic_noise",
    "manifest",
    "checkpoint",
    "out_dir",
];

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: Display,
{
    value
        .parse()
        .map_err(|e| Error::Config(format!("{key}: cannot parse '{value}': {e}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true or false, got '{value}'"))),
    }
}

fn length_policy_name(policy: LengthPolicy) -> &'static str {
    match policy {
        LengthPolicy::Truncate => "truncate",
        LengthPolicy::Subsample => "subsample",
    }
}

fn path_text(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::parse_with_base(&text, base)
            .map_err(|e| Error::Config(format!("{}: {}", path.display(), strip_config(e))))
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_with_base(text, Path::new(""))
    }

    fn parse_with_base(text: &str, base: &Path) -> Result<Self> {
        let mut config = RunConfig::default();
        let mut seen = std::collections::HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split_once('#').map_or(raw, |(before, _)| before).trim();
            if line.is_empty() {
                continue;
            }
            let at = |msg: String| Error::Config(format!("line {}: {msg}", i + 1));
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| at(format!("expected 'key = value', got '{line}'")))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(at(format!("duplicate key '{key}'")));
            }
            config.set(key, value, base).map_err(|e| at(strip_config(e)))?;
        }
        config.validate()?;
        Ok(config)
    }

    /// Sets one key; relative paths are joined onto `base`.
    pub fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<()> {
        let path = |v: &str| {
            if v.is_empty() {
                None
            } else {
                Some(base.join(v))
            }
        };
        let m = &mut self.model;
        let t = &mut self.train;
        let f = &mut self.frame;
        match key {
            "topology" => m.topology = parse_value(key, value)?,
            "nodes" => m.nodes = parse_value(key, value)?,
            "laplacian" => m.laplacian = parse_value(key, value)?,
            "conv_mode" => m.conv_mode = parse_value(key, value)?,
            "pooling" => m.pooling = parse_pool_mode(value)?,
            "conv1_hidden" => m.conv1_hidden = parse_value(key, value)?,
            "conv1_out" => m.conv1_out = parse_value(key, value)?,
            "conv2_hidden" => m.conv2_hidden = parse_value(key, value)?,
            "embedding_dim" => m.embedding_dim = parse_value(key, value)?,
            "lr0" => t.lr0 = parse_value(key, value)?,
            "decay_factor" => t.decay_factor = parse_value(key, value)?,
            "decay_every" => t.decay_every = parse_value(key, value)?,
            "epochs" => t.epochs = parse_value(key, value)?,
            "batch_size" => t.batch_size = parse_value(key, value)?,
            "seed" => t.seed = parse_value(key, value)?,
            "folds" => self.folds = parse_value(key, value)?,
            "window_ms" => f.window_ms = parse_value(key, value)?,
            "stride_ms" => f.stride_ms = parse_value(key, value)?,
            "smoothing_window" => f.smoothing_window = parse_value(key, value)?,
            "mel_filters" => f.mel_filters = parse_value(key, value)?,
            "mfcc_count" => f.mfcc_count = parse_value(key, value)?,
            "f0_min_hz" => f.f0_min_hz = parse_value(key, value)?,
            "f0_max_hz" => f.f0_max_hz = parse_value(key, value)?,
            "voicing_threshold" => f.voicing_threshold = parse_value(key, value)?,
            "length_policy" => f.length_policy = parse_value(key, value)?,
            "spontaneity" => self.spontaneity = parse_bool(key, value)?,
            "synthetic_per_class" => self.synthetic_per_class = parse_value(key, value)?,
            "synthetic_classes" => self.synthetic_classes = parse_value(key, value)?,
            "synthetic_features" => self.synthetic_features = parse_value(key, value)?,
            "synthetic_noise" => self.synthetic_noise = parse_value(key, value)?,
            "manifest" => self.manifest = path(value),
            "checkpoint" => self.checkpoint = path(value),
            "out_dir" => self.out_dir = path(value),
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.model.graph()?;
        self.frame.validate()?;
        let t = &self.train;
        if !(t.lr0 > 0.0 && t.lr0.is_finite()) {
            return Err(Error::Config(format!("lr0 must be positive, got {}", t.lr0)));
        }
        if !(t.decay_factor > 0.0 && t.decay_factor <= 1.0) {
            return Err(Error::Config(format!(
                "decay_factor must lie in (0, 1], got {}",
                t.decay_factor
            )));
        }
        let positive = [
            ("decay_every", t.decay_every),
            ("batch_size", t.batch_size),
            ("conv1_hidden", self.model.conv1_hidden),
            ("conv1_out", self.model.conv1_out),
            ("conv2_hidden", self.model.conv2_hidden),
            ("embedding_dim", self.model.embedding_dim),
            ("synthetic_per_class", self.synthetic_per_class),
            ("synthetic_features", self.synthetic_features),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.folds < 2 {
            return Err(Error::Config(format!("folds must be at least 2, got {}", self.folds)));
        }
        Ok(())
    }

    /// The model configuration for data with the given shape.
    pub fn model_config(&self, input_dim: usize, num_classes: usize) -> ModelConfig {
        ModelConfig {
            input_dim,
            num_classes,
            ..self.model.clone()
        }
    }

    pub fn synthetic_spec(&self) -> SyntheticSpec {
        SyntheticSpec {
            per_class: self.synthetic_per_class,
            nodes: self.model.nodes,
            features: self.synthetic_features,
            classes: self.synthetic_classes,
            noise: self.synthetic_noise,
            seed: self.train.seed,
        }
    }

    /// Every key with its effective value, in [`CONFIG_KEYS`] order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let (m, t, f) = (&self.model, &self.train, &self.frame);
        let values = [
            m.topology.to_string(),
            m.nodes.to_string(),
            m.laplacian.to_string(),
            m.conv_mode.to_string(),
            pool_mode_name(m.pooling).to_string(),
            m.conv1_hidden.to_string(),
            m.conv1_out.to_string(),
            m.conv2_hidden.to_string(),
            m.embedding_dim.to_string(),
            format!("{:?}", t.lr0),
            format!("{:?}", t.decay_factor),
            t.decay_every.to_string(),
            t.epochs.to_string(),
            t.batch_size.to_string(),
            t.seed.to_string(),
            self.folds.to_string(),
            format!("{:?}", f.window_ms),
            format!("{:?}", f.stride_ms),
            f.smoothing_window.to_string(),
            f.mel_filters.to_string(),
            f.mfcc_count.to_string(),
            format!("{:?}", f.f0_min_hz),
            format!("{:?}", f.f0_max_hz),
            format!("{:?}", f.voicing_threshold),
            length_policy_name(f.length_policy).to_string(),
            self.spontaneity.to_string(),
            self.synthetic_per_class.to_string(),
            self.synthetic_classes.to_string(),
            self.synthetic_features.to_string(),
            format!("{:?}", self.synthetic_noise),
            path_text(&self.manifest),
            path_text(&self.checkpoint),
            path_text(&self.out_dir),
        ];
        CONFIG_KEYS.iter().copied().zip(values).collect()
    }

    pub fn render(&self) -> String {
        self.entries()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

fn strip_config(e: Error) -> String {
    match e {
        Error::Config(msg) => msg,
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ConvMode;
    use crate::spectral::Topology;
    use crate::tensor::PoolMode;

    #[test]
    fn defaults_render_and_parse_back() {
        let c = RunConfig::default();
        assert_eq!(RunConfig::parse(&c.render()).unwrap(), c);
    }

    #[test]
    fn every_key_is_settable() {
        let mut c = RunConfig::default();
        for (k, v) in RunConfig::default().entries() {
            c.set(k, &v, Path::new("")).unwrap();
        }
        assert_eq!(c, RunConfig::default());
    }

    #[test]
    fn parses_values_and_comments() {
        let text = "# line graph run\n\ntopology = line   # or cycle\npooling = MAX\nconv_mode = linear\n\
                    lr0 = 0.02\nspontaneity = yes\nmanifest = m.csv\ncheckpoint =  # unset\n";
        let c = RunConfig::parse(text).unwrap();
        assert_eq!(c.model.topology, Topology::Line);
        assert_eq!(c.model.pooling, PoolMode::Max);
        assert_eq!(c.model.conv_mode, ConvMode::LinearKernel);
        assert_eq!(c.train.lr0, 0.02);
        assert!(c.spontaneity);
        assert_eq!(c.manifest, Some(PathBuf::from("m.csv")));
        assert_eq!(c.checkpoint, None);
        let back = RunConfig::parse(&c.render()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn rejects_unknown_duplicate_and_malformed() {
        let err = RunConfig::parse("epochs = 3\nlearning_rate = 0.1\n").unwrap_err();
        assert_eq!(err.to_string(), "config error: line 2: unknown key 'learning_rate'");
        let err = RunConfig::parse("seed = 1\nseed = 2\n").unwrap_err();
        assert!(err.to_string().contains("duplicate key 'seed'"));
        assert!(RunConfig::parse("epochs 3\n").is_err());
        assert!(RunConfig::parse("epochs = many\n").unwrap_err().to_string().contains("epochs"));
        assert!(RunConfig::parse("folds = 1\n").is_err());
        assert!(RunConfig::parse("nodes = 2\n").is_err());
        assert!(RunConfig::parse("topology = star\n").is_err());
    }

    #[test]
    fn relative_paths_follow_the_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        std::fs::write(&path, "manifest = data/m.csv\ncheckpoint = /abs/model.json\n").unwrap();
        let c = RunConfig::load(&path).unwrap();
        assert_eq!(c.manifest, Some(dir.path().join("data/m.csv")));
        assert_eq!(c.checkpoint, Some(PathBuf::from("/abs/model.json")));
    }
}
