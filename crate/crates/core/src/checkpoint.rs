//! Model checkpoints as versioned JSON.
//!
//! Floats are written in shortest round-trip form and parsed back exactly,
//! so a save/load cycle reproduces every weight bit for bit. The file also
//! carries the feature configuration the model was trained with.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FrameConfig;
use crate::model::{ModelConfig, ModelParams, SpectralConvLayer};
use crate::tensor::Tensor;

pub const CHECKPOINT_FORMAT: &str = "spectral-ser-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub model: ModelConfig,
    pub features: FrameConfig,
    /// Whether inputs carry the trailing spontaneity column.
    pub spontaneity: bool,
    /// Class names in label-index order.
    pub labels: Vec<String>,
    pub parameter_count: usize,
    pub conv1: SpectralConvLayer,
    pub conv2: SpectralConvLayer,
    pub fc_w: Tensor,
    pub fc_b: Tensor,
}

impl Checkpoint {
    pub fn new(
        model: &ModelParams,
        features: &FrameConfig,
        spontaneity: bool,
        labels: &[String],
    ) -> Result<Self> {
        if labels.len() != model.config().num_classes {
            return Err(Error::Checkpoint(format!(
                "{} labels for a {}-class model",
                labels.len(),
                model.config().num_classes
            )));
        }
        if model.tensors().iter().any(|t| !t.is_finite()) {
            return Err(Error::Checkpoint("refusing to save non-finite weights".into()));
        }
        Ok(Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            model: model.config().clone(),
            features: features.clone(),
            spontaneity,
            labels: labels.to_vec(),
            parameter_count: model.parameter_count(),
            conv1: model.conv1.clone(),
            conv2: model.conv2.clone(),
            fc_w: model.fc_w.clone(),
            fc_b: model.fc_b.clone(),
        })
    }

    /// Rebuilds the model, re-deriving the spectral basis from the stored
    /// topology and size.
    pub fn to_model(&self) -> Result<ModelParams> {
        let model = ModelParams::from_parts(
            self.model.clone(),
            self.conv1.clone(),
            self.conv2.clone(),
            self.fc_w.clone(),
            self.fc_b.clone(),
        )
        .map_err(|e| Error::Checkpoint(format!("inconsistent weights: {e}")))?;
        if model.parameter_count() != self.parameter_count {
            return Err(Error::Checkpoint(format!(
                "parameter count {} does not match recorded {}",
                model.parameter_count(),
                self.parameter_count
            )));
        }
        Ok(model)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Checkpoint(format!("serialize: {e}")))?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Header {
            format: String,
            version: u32,
        }
        let header: Header = serde_json::from_str(text)
            .map_err(|e| Error::Checkpoint(format!("not a checkpoint: {e}")))?;
        if header.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unknown format '{}'", header.format)));
        }
        if header.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported version {} (this build reads {CHECKPOINT_VERSION})",
                header.version
            )));
        }
        serde_json::from_str(text).map_err(|e| Error::Checkpoint(format!("malformed: {e}")))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Checkpoint(msg) => Error::Checkpoint(format!("{}: {msg}", path.display())),
            other => other,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ConvMode;
    use crate::tensor::PoolMode;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small(mode: ConvMode) -> ModelParams {
        let cfg = ModelConfig {
            nodes: 8,
            conv_mode: mode,
            pooling: PoolMode::Max,
            input_dim: 3,
            conv1_hidden: 5,
            conv1_out: 4,
            conv2_hidden: 6,
            embedding_dim: 3,
            num_classes: 2,
            ..ModelConfig::default()
        };
        ModelParams::init(cfg, &mut ChaCha8Rng::seed_from_u64(9)).unwrap()
    }

    fn labels() -> Vec<String> {
        vec!["a".into(), "b".into()]
    }

    #[test]
    fn round_trip_is_bit_exact() {
        for mode in [ConvMode::MlpKernel, ConvMode::LinearKernel, ConvMode::DiagonalGain] {
            let model = small(mode);
            let ck = Checkpoint::new(&model, &FrameConfig::default(), false, &labels()).unwrap();
            let back = Checkpoint::from_json(&ck.to_json().unwrap()).unwrap();
            assert_eq!(back, ck);
            let restored = back.to_model().unwrap();
            for (a, b) in model.tensors().iter().zip(restored.tensors()) {
                let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
                assert_eq!(bits(a), bits(b));
            }
            assert_eq!(back.to_json().unwrap(), ck.to_json().unwrap());
        }
    }

    #[test]
    fn rejects_wrong_format_and_version() {
        let ck = Checkpoint::new(&small(ConvMode::LinearKernel), &FrameConfig::default(), false, &labels())
            .unwrap();
        let text = ck.to_json().unwrap();
        let bumped = text.replacen("\"version\": 1", "\"version\": 99", 1);
        assert!(Checkpoint::from_json(&bumped).unwrap_err().to_string().contains("version 99"));
        let renamed = text.replacen(CHECKPOINT_FORMAT, "other", 1);
        assert!(Checkpoint::from_json(&renamed).is_err());
        assert!(Checkpoint::from_json("{}").is_err());
    }

    #[test]
    fn rejects_shape_tampering() {
        let mut ck =
            Checkpoint::new(&small(ConvMode::LinearKernel), &FrameConfig::default(), false, &labels())
                .unwrap();
        ck.fc_b = Tensor::zeros(1, 3);
        assert!(ck.to_model().is_err());
    }

    #[test]
    fn label_count_must_match() {
        let err = Checkpoint::new(
            &small(ConvMode::MlpKernel),
            &FrameConfig::default(),
            false,
            &["x".to_string()],
        )
        .unwrap_err();
        assert!(err.to_string().contains("1 labels"));
    }
}
