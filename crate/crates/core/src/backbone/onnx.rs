use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use sha2::{Digest, Sha256};
use tract_onnx::prelude::*;
use tract_onnx::tract_hir::infer::Factoid;

use super::extract::FeatureExtractor;
use super::preprocess::to_input_tensor;
use super::{fingerprint, BackboneError, BackboneSpec, Fingerprint};
use crate::raster::RawImage;

/// Tensor layout of the model's image input (and, for feature-map models,
/// of its output).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    Nchw,
    Nhwc,
}

type Plan = Arc<TypedRunnableModel>;

/// A loaded, frozen backbone. Read-only after load; safe to share between
/// worker threads.
pub struct BackboneHandle {
    spec: BackboneSpec,
    layout: Layout,
    plan: Plan,
    fingerprint: Fingerprint,
    calls: AtomicU64,
}

impl std::fmt::Debug for BackboneHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BackboneHandle")
            .field("spec", &self.spec)
            .field("layout", &self.layout)
            .finish_non_exhaustive()
    }
}

impl BackboneHandle {
    pub fn load(spec: &BackboneSpec) -> Result<Self, BackboneError> {
        spec.validate()?;
        let unreadable = |reason: String| BackboneError::ModelFileUnreadable {
            path: spec.model_file.clone(),
            reason,
        };
        let bytes = std::fs::read(&spec.model_file).map_err(|e| unreadable(e.to_string()))?;
        let digest: [u8; 32] = Sha256::digest(&bytes).into();

        let model = tract_onnx::onnx()
            .model_for_read(&mut bytes.as_slice())
            .map_err(|e| unreadable(format!("{e:#}")))?;
        let layout = detect_layout(&model);
        let s = spec.input_size;
        let shape: [usize; 4] = match layout {
            Layout::Nchw => [1, 3, s, s],
            Layout::Nhwc => [1, s, s, 3],
        };
        let typed = model
            .with_input_fact(0, f32::fact(shape).into())
            .and_then(|m| m.into_optimized())
            .map_err(|e| unreadable(format!("{e:#}")))?;
        let out_shape: Vec<usize> = typed
            .output_fact(0)
            .ok()
            .and_then(|f| f.shape.as_concrete().map(|d| d.to_vec()))
            .ok_or_else(|| {
                BackboneError::UnsupportedModel("model output shape is not concrete".into())
            })?;
        let found = output_width(&out_shape, layout, spec.pre_pooled)?;
        if found != spec.feature_dim {
            return Err(BackboneError::DimensionMismatch {
                declared: spec.feature_dim,
                found,
            });
        }
        let plan = typed
            .into_runnable()
            .map_err(|e| unreadable(format!("{e:#}")))?;
        Ok(BackboneHandle {
            spec: spec.clone(),
            layout,
            plan,
            fingerprint: fingerprint(&digest, spec.input_size, spec.preprocess_mode),
            calls: AtomicU64::new(0),
        })
    }

    pub fn spec(&self) -> &BackboneSpec {
        &self.spec
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    /// Number of forward passes run through this handle.
    pub fn extract_calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    fn run(&self, image: &RawImage) -> Result<Vec<f32>, BackboneError> {
        let s = self.spec.input_size;
        let data = to_input_tensor(image, s, self.spec.preprocess_mode, self.layout);
        let shape: &[usize] = match self.layout {
            Layout::Nchw => &[1, 3, s, s],
            Layout::Nhwc => &[1, s, s, 3],
        };
        let input = Tensor::from_shape(shape, &data)
            .map_err(|e| BackboneError::InferenceFailure(format!("{e:#}")))?;
        let outputs = self
            .plan
            .run(tvec!(input.into()))
            .map_err(|e| BackboneError::InferenceFailure(format!("{e:#}")))?;
        let view = outputs[0]
            .to_plain_array_view::<f32>()
            .map_err(|e| BackboneError::InferenceFailure(format!("{e:#}")))?;
        let dims = view.shape().to_vec();
        let flat: Vec<f32> = view.iter().copied().collect();
        Ok(if self.spec.pre_pooled {
            flat
        } else {
            global_average_pool(&flat, &dims, self.layout)
        })
    }
}

impl FeatureExtractor for BackboneHandle {
    fn backbone_id(&self) -> &str {
        self.spec.backbone_id.name()
    }

    fn feature_dim(&self) -> usize {
        self.spec.feature_dim
    }

    fn fingerprint(&self) -> Fingerprint {
        self.fingerprint
    }

    fn extract_values(&self, image: &RawImage) -> Result<Vec<f32>, BackboneError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        let values = self.run(image)?;
        if values.len() != self.spec.feature_dim {
            return Err(BackboneError::DimensionMismatch {
                declared: self.spec.feature_dim,
                found: values.len(),
            });
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(BackboneError::InferenceFailure(format!(
                "non-finite feature at index {bad}"
            )));
        }
        Ok(values)
    }
}

fn detect_layout(model: &InferenceModel) -> Layout {
    let Ok(fact) = model.input_fact(0) else {
        return Layout::Nchw;
    };
    let dims: Vec<Option<i64>> = fact
        .shape
        .dims()
        .map(|d| d.concretize().and_then(|d| d.to_i64().ok()))
        .collect();
    match dims.as_slice() {
        [_, Some(3), _, _] => Layout::Nchw,
        [_, _, _, Some(3)] => Layout::Nhwc,
        _ => Layout::Nchw,
    }
}

fn output_width(shape: &[usize], layout: Layout, pre_pooled: bool) -> Result<usize, BackboneError> {
    if pre_pooled {
        return Ok(shape.iter().skip(1).product());
    }
    match (shape.len(), layout) {
        (4, Layout::Nchw) => Ok(shape[1]),
        (4, Layout::Nhwc) => Ok(shape[3]),
        _ => Err(BackboneError::UnsupportedModel(format!(
            "expected a rank-4 feature map output, got shape {shape:?}; set pre_pooled for vector outputs"
        ))),
    }
}

/// Mean over spatial positions of a single-image feature map, accumulated
/// in f64.
fn global_average_pool(flat: &[f32], dims: &[usize], layout: Layout) -> Vec<f32> {
    let (c, hw) = match layout {
        Layout::Nchw => (dims[1], dims[2] * dims[3]),
        Layout::Nhwc => (dims[3], dims[1] * dims[2]),
    };
    let mut sums = vec![0f64; c];
    for p in 0..hw {
        for (k, sum) in sums.iter_mut().enumerate() {
            let idx = match layout {
                Layout::Nchw => k * hw + p,
                Layout::Nhwc => p * c + k,
            };
            *sum += flat[idx] as f64;
        }
    }
    sums.into_iter().map(|s| (s / hw as f64) as f32).collect()
}
