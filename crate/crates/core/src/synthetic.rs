//! Feature-space synthetic cohorts and the phase timing harness.
//!
//! Class `c` frames are drawn from an isotropic unit Gaussian centred at
//! `(separation / √2) · e_c`, so any two centroids are `separation` apart.
//! Frame `i` of class `c` belongs to patient `i mod P`; among that
//! patient's three zones `z` with `(p + z) mod 4 == c` it goes to the
//! `(i / P) mod 3`-th. Every zone therefore holds a single class, and a
//! patient that received frames in all 12 zones has a true global score of
//! 18. Patients with `p mod 4 == 3` are healthy.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use sha2::{Digest, Sha256};

use crate::backbone::{FeatureCache, Fingerprint};
use crate::data::{CovidStatus, DataError, ImageRecord, SeverityScore, Zone};
use crate::error::Result;
use crate::head::{predict, train, LabeledFeatures, TrainConfig};
use crate::metrics::evaluate;
use crate::rng::SeededRng;
use crate::MetricsSummary;

pub const SYNTHETIC_BACKBONE: &str = "synthetic";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub n_per_class: usize,
    pub feature_dim: usize,
    pub class_separation: f64,
    pub n_patients: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_per_class: 250,
            feature_dim: 64,
            class_separation: 8.0,
            n_patients: 20,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), DataError> {
        let bad = |m: &str| Err(DataError::Invalid(format!("synthetic spec: {m}")));
        if self.n_per_class < 1 {
            return bad("n_per_class must be at least 1");
        }
        if self.feature_dim < 4 {
            return bad("feature_dim must be at least 4 (one axis per class centroid)");
        }
        if !(self.class_separation >= 0.0 && self.class_separation.is_finite()) {
            return bad("class_separation must be finite and non-negative");
        }
        if self.n_patients < 1 {
            return bad("n_patients must be at least 1");
        }
        Ok(())
    }

    /// Identifies the generated feature set; stands in for a model
    /// fingerprint in the cache header.
    pub fn fingerprint(&self) -> Fingerprint {
        let mut h = Sha256::new();
        h.update(b"synthetic/v1");
        h.update((self.n_per_class as u64).to_le_bytes());
        h.update((self.feature_dim as u64).to_le_bytes());
        h.update(self.class_separation.to_le_bytes());
        h.update((self.n_patients as u64).to_le_bytes());
        h.update(self.seed.to_le_bytes());
        h.finalize().into()
    }
}

/// Generated records (one per frame, class-major order) and their features
/// as copy 0 of a cache with backbone id `"synthetic"`.
#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub spec: SyntheticSpec,
    pub records: Vec<ImageRecord>,
    pub cache: FeatureCache,
}

impl SyntheticDataset {
    pub fn labeled_features(&self) -> LabeledFeatures {
        let mut data = LabeledFeatures::new(self.spec.feature_dim);
        for r in &self.records {
            let row = self.cache.get(&r.image_id, 0).expect("every record has features");
            data.push(row, r.label).expect("row length equals feature_dim");
        }
        data
    }
}

pub fn patient_id(p: usize) -> String {
    format!("P{p:03}")
}

pub fn gen_synthetic_features(spec: &SyntheticSpec) -> Result<SyntheticDataset> {
    spec.validate()?;
    let mut rng = SeededRng::derive(spec.seed, b"synthetic");
    let offset = spec.class_separation / std::f64::consts::SQRT_2;
    let mut cache = FeatureCache::new(SYNTHETIC_BACKBONE, spec.fingerprint(), spec.feature_dim);
    let mut records = Vec::with_capacity(4 * spec.n_per_class);
    for c in 0..4 {
        for i in 0..spec.n_per_class {
            let p = i % spec.n_patients;
            let pick = (i / spec.n_patients) % 3;
            let zone_index = (c + 4 - p % 4) % 4 + 4 * pick;
            let image_id = format!("syn_c{c}_{i:05}");
            let values: Vec<f32> = (0..spec.feature_dim)
                .map(|d| {
                    let mean = if d == c { offset } else { 0.0 };
                    (mean + rng.standard_normal()) as f32
                })
                .collect();
            cache.insert(image_id.clone(), 0, values)?;
            records.push(ImageRecord {
                image_path: format!("synthetic/{image_id}"),
                image_id,
                patient_id: patient_id(p),
                covid_status: if p % 4 == 3 {
                    CovidStatus::Healthy
                } else {
                    CovidStatus::Positive
                },
                zone: Some(Zone::from_index(zone_index)),
                label: SeverityScore::from_index(c),
            });
        }
    }
    Ok(SyntheticDataset {
        spec: *spec,
        records,
        cache,
    })
}

/// Wall time per phase, measured with a monotonic clock.
#[derive(Debug, Clone, PartialEq)]
pub struct TimingReport {
    pub backbone_id: String,
    pub extraction: Duration,
    pub training: Duration,
    pub evaluation: Duration,
    /// Harness wall time; at least the sum of the three phases.
    pub total: Duration,
    pub n_frames: usize,
    pub epochs: usize,
    pub hardware_note: String,
}

impl TimingReport {
    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "backbone_id={}", self.backbone_id);
        let _ = writeln!(out, "n_frames={}", self.n_frames);
        let _ = writeln!(out, "epochs={}", self.epochs);
        let _ = writeln!(out, "extraction_seconds={:.6}", self.extraction.as_secs_f64());
        let _ = writeln!(out, "training_seconds={:.6}", self.training.as_secs_f64());
        let _ = writeln!(out, "evaluation_seconds={:.6}", self.evaluation.as_secs_f64());
        let _ = writeln!(out, "total_seconds={:.6}", self.total.as_secs_f64());
        let _ = writeln!(out, "hardware={}", self.hardware_note);
        out
    }
}

pub fn hardware_note() -> String {
    let threads = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    format!(
        "{}-{} cpu, {threads} hardware threads",
        std::env::consts::ARCH,
        std::env::consts::OS
    )
}

/// Times feature assembly, training on every frame and in-sample
/// evaluation for a synthetic dataset. Returns the timings and the
/// training-set metrics.
pub fn time_pipeline(
    dataset: &SyntheticDataset,
    config: &TrainConfig,
) -> Result<(TimingReport, MetricsSummary)> {
    config.validate()?;
    let start = Instant::now();

    let t = Instant::now();
    let data = dataset.labeled_features();
    let extraction = t.elapsed();

    let outcome = train::<f64>(&data, config)?;
    let training = outcome.wall_time;

    let t = Instant::now();
    let inputs: Vec<(&str, &[f32])> = dataset
        .records
        .iter()
        .enumerate()
        .map(|(i, r)| (r.image_id.as_str(), data.row(i)))
        .collect();
    let predictions = predict(&outcome.params, &inputs)?;
    let summary = evaluate(&predictions, data.labels())?;
    let evaluation = t.elapsed();

    Ok((
        TimingReport {
            backbone_id: SYNTHETIC_BACKBONE.to_string(),
            extraction,
            training,
            evaluation,
            total: start.elapsed(),
            n_frames: data.len(),
            epochs: config.epochs,
            hardware_note: hardware_note(),
        },
        summary,
    ))
}
