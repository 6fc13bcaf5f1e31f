//! Frozen feature extraction: backbone registry, ONNX inference, and the
//! persistent feature cache.

mod cache;
mod extract;
mod onnx;
mod preprocess;

pub use cache::{FeatureCache, CACHE_MAGIC, CACHE_VERSION};
pub use extract::{FeatureVector, 
    extract, extract_all, AugmentPlan, DirImageSource, ExtractJob, FeatureExtractor, ImageSource,
};
pub use onnx::{BackboneHandle, Layout};
pub use preprocess::to_input_tensor;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// 32-byte SHA-256 identity of (model file, input size, preprocessing).
pub type Fingerprint = [u8; 32];

#[derive(Debug, Error)]
pub enum BackboneError {
    #[error("{path}: cannot read model file: {reason}")]
    ModelFileUnreadable { path: PathBuf, reason: String },

    #[error("model output has {found} features but the backbone declares feature_dim {declared}")]
    DimensionMismatch { declared: usize, found: usize },

    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    #[error("inference failed: {0}")]
    InferenceFailure(String),

    #[error("image {image_id:?}: {message}")]
    ImageFailed { image_id: String, message: String },

    #[error("feature cache: {0}")]
    Cache(String),

    #[error("invalid backbone spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackboneId {
    Xception,
    Resnet50,
    Vgg16,
    Custom,
}

impl BackboneId {
    pub fn name(self) -> &'static str {
        match self {
            BackboneId::Xception => "xception",
            BackboneId::Resnet50 => "resnet50",
            BackboneId::Vgg16 => "vgg16",
            BackboneId::Custom => "custom",
        }
    }
}

impl fmt::Display for BackboneId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BackboneId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "xception" => Ok(BackboneId::Xception),
            "resnet50" => Ok(BackboneId::Resnet50),
            "vgg16" => Ok(BackboneId::Vgg16),
            "custom" => Ok(BackboneId::Custom),
            other => Err(format!("unknown backbone {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PreprocessMode {
    /// `x / 255`, then per-channel ImageNet mean/std normalization (RGB).
    Scale01Center,
    /// `x / 127.5 - 1`.
    ScalePm1,
    /// RGB to BGR, then subtract the ImageNet BGR channel means.
    MeanSubtract,
}

impl PreprocessMode {
    pub fn name(self) -> &'static str {
        match self {
            PreprocessMode::Scale01Center => "scale_01_center",
            PreprocessMode::ScalePm1 => "scale_pm1",
            PreprocessMode::MeanSubtract => "mean_subtract",
        }
    }
}

impl fmt::Display for PreprocessMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PreprocessMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "scale_01_center" => Ok(PreprocessMode::Scale01Center),
            "scale_pm1" => Ok(PreprocessMode::ScalePm1),
            "mean_subtract" => Ok(PreprocessMode::MeanSubtract),
            other => Err(format!("unknown preprocess mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackboneSpec {
    pub backbone_id: BackboneId,
    pub model_file: PathBuf,
    pub input_size: usize,
    pub feature_dim: usize,
    pub preprocess_mode: PreprocessMode,
    /// The model emits pooled vectors rather than a feature map.
    pub pre_pooled: bool,
}

impl BackboneSpec {
    /// Registry entry for a named backbone: published input size, pooled
    /// width and preprocessing. `None` for [`BackboneId::Custom`].
    pub fn registry(id: BackboneId) -> Option<(usize, usize, PreprocessMode)> {
        match id {
            BackboneId::Xception => Some((299, 2048, PreprocessMode::ScalePm1)),
            BackboneId::Resnet50 => Some((224, 2048, PreprocessMode::MeanSubtract)),
            BackboneId::Vgg16 => Some((224, 512, PreprocessMode::MeanSubtract)),
            BackboneId::Custom => None,
        }
    }

    pub fn named(id: BackboneId, model_file: impl Into<PathBuf>) -> Option<Self> {
        let (input_size, feature_dim, preprocess_mode) = Self::registry(id)?;
        Some(BackboneSpec {
            backbone_id: id,
            model_file: model_file.into(),
            input_size,
            feature_dim,
            preprocess_mode,
            pre_pooled: false,
        })
    }

    pub fn custom(
        model_file: impl Into<PathBuf>,
        input_size: usize,
        feature_dim: usize,
        preprocess_mode: PreprocessMode,
    ) -> Self {
        BackboneSpec {
            backbone_id: BackboneId::Custom,
            model_file: model_file.into(),
            input_size,
            feature_dim,
            preprocess_mode,
            pre_pooled: false,
        }
    }

    pub fn with_pre_pooled(mut self, pre_pooled: bool) -> Self {
        self.pre_pooled = pre_pooled;
        self
    }

    pub fn validate(&self) -> Result<(), BackboneError> {
        if self.input_size == 0 || self.feature_dim == 0 {
            return Err(BackboneError::InvalidSpec(
                "input_size and feature_dim must be positive".into(),
            ));
        }
        // Named backbones may declare a different feature_dim; the mismatch
        // then surfaces at load time against the graph's output shape.
        if let Some((size, _, mode)) = Self::registry(self.backbone_id) {
            if size != self.input_size || mode != self.preprocess_mode {
                return Err(BackboneError::InvalidSpec(format!(
                    "{} requires input_size {size} and preprocess {mode}",
                    self.backbone_id
                )));
            }
        }
        Ok(())
    }
}

/// SHA-256 over (model file digest, input size as u32 LE, preprocess mode
/// name).
pub fn fingerprint(model_digest: &[u8; 32], input_size: usize, mode: PreprocessMode) -> Fingerprint {
    let mut h = Sha256::new();
    h.update(model_digest);
    h.update((input_size as u32).to_le_bytes());
    h.update(mode.name().as_bytes());
    h.finalize().into()
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
