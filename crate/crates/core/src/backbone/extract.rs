use std::collections::HashMap;
use std::path::PathBuf;

use rayon::prelude::*;

use super::{BackboneError, FeatureCache, Fingerprint};
use crate::augment::{augment, AugmentParams};
use crate::data::ImageRecord;
use crate::error::{Error, Result};
use crate::raster::RawImage;
use crate::rng::SeededRng;

/// Anything that maps a frame to a fixed-length feature vector.
pub trait FeatureExtractor: Sync {
    fn backbone_id(&self) -> &str;
    fn feature_dim(&self) -> usize;
    fn fingerprint(&self) -> Fingerprint;
    fn extract_values(&self, image: &RawImage) -> Result<Vec<f32>, BackboneError>;
}

/// Extracted vector for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub image_id: String,
    pub backbone_id: String,
    pub values: Vec<f32>,
    /// 0 for the unaugmented frame.
    pub augmented_copy_index: u32,
}

pub fn extract<E: FeatureExtractor + ?Sized>(
    extractor: &E,
    image_id: &str,
    image: &RawImage,
) -> Result<FeatureVector, BackboneError> {
    Ok(FeatureVector {
        image_id: image_id.to_string(),
        backbone_id: extractor.backbone_id().to_string(),
        values: extractor.extract_values(image)?,
        augmented_copy_index: 0,
    })
}

pub trait ImageSource: Sync {
    fn load(&self, record: &ImageRecord) -> Result<RawImage>;
}

/// Reads frames from disk, resolving relative paths against `base` (the
/// manifest's directory).
#[derive(Debug, Clone)]
pub struct DirImageSource {
    pub base: PathBuf,
}

impl ImageSource for DirImageSource {
    fn load(&self, record: &ImageRecord) -> Result<RawImage> {
        RawImage::open(record.resolve_path(&self.base))
    }
}

impl ImageSource for HashMap<String, RawImage> {
    fn load(&self, record: &ImageRecord) -> Result<RawImage> {
        self.get(&record.image_id).cloned().ok_or_else(|| {
            Error::Backbone(BackboneError::ImageFailed {
                image_id: record.image_id.clone(),
                message: "image not found".into(),
            })
        })
    }
}

/// Augmentation for copies with index > 0. The stream for a copy is
/// derived from `seed` and `augment/{tag}/{image_id}/{copy}`, so the result
/// never depends on scheduling.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentPlan {
    pub params: AugmentParams,
    pub seed: u64,
    pub tag: String,
}

impl AugmentPlan {
    pub fn rng_for(&self, image_id: &str, copy: u32) -> SeededRng {
        SeededRng::derive(
            self.seed,
            format!("augment/{}/{}/{}", self.tag, image_id, copy).as_bytes(),
        )
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ExtractJob<'a> {
    pub record: &'a ImageRecord,
    pub copy: u32,
}

/// Fills `cache` with one vector per job, skipping entries already present.
/// Returns the number of vectors computed. Output is independent of
/// `parallelism`.
pub fn extract_all<E: FeatureExtractor + ?Sized>(
    extractor: &E,
    jobs: &[ExtractJob<'_>],
    images: &dyn ImageSource,
    augment_plan: Option<&AugmentPlan>,
    cache: &mut FeatureCache,
    parallelism: usize,
) -> Result<usize> {
    if !cache.compatible_with(
        extractor.backbone_id(),
        &extractor.fingerprint(),
        extractor.feature_dim(),
    ) {
        return Err(BackboneError::Cache(format!(
            "cache was built for backbone {:?} with a different fingerprint or dimension",
            cache.backbone_id()
        ))
        .into());
    }
    let mut pending: Vec<ExtractJob<'_>> = Vec::new();
    for job in jobs {
        if !cache.contains(&job.record.image_id, job.copy) {
            pending.push(*job);
        }
    }
    pending.sort_by(|a, b| (&a.record.image_id, a.copy).cmp(&(&b.record.image_id, b.copy)));
    pending.dedup_by(|a, b| a.record.image_id == b.record.image_id && a.copy == b.copy);
    if pending.is_empty() {
        return Ok(0);
    }

    let run_one = |job: &ExtractJob<'_>| -> Result<Vec<f32>> {
        let tag = |e: Error| -> Error {
            match e {
                Error::Backbone(BackboneError::ImageFailed { .. }) => e,
                other => Error::Backbone(BackboneError::ImageFailed {
                    image_id: job.record.image_id.clone(),
                    message: other.to_string(),
                }),
            }
        };
        let mut image = images.load(job.record).map_err(tag)?;
        if job.copy > 0 {
            let plan = augment_plan.ok_or_else(|| {
                tag(Error::Config(
                    "augmented copy requested without augmentation parameters".into(),
                ))
            })?;
            let mut rng = plan.rng_for(&job.record.image_id, job.copy);
            image = augment(&image, &plan.params, &mut rng);
        }
        extractor
            .extract_values(&image)
            .map_err(|e| tag(Error::Backbone(e)))
    };

    let results: Vec<Result<Vec<f32>>> = if parallelism <= 1 {
        pending.iter().map(run_one).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(parallelism)
            .build()
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
        pool.install(|| pending.par_iter().map(run_one).collect())
    };

    let computed = results.len();
    for (job, values) in pending.iter().zip(results) {
        cache.insert(job.record.image_id.clone(), job.copy, values?)?;
    }
    Ok(computed)
}
