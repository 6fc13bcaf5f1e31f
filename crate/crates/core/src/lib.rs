//! Lung-ultrasound frame severity scoring with a frozen convolutional
//! backbone and a single trainable softmax layer.
//!
//! The pipeline runs in five stages:
//!
//! 1. [`data`] reads the per-frame manifest and plans patient-level folds.
//! 2. [`augment`] applies seeded geometric augmentation to training frames.
//! 3. [`backbone`] maps frames to fixed-length feature vectors through an
//!    ONNX model and keeps them in a binary feature cache.
//! 4. [`head`] trains dropout + a 4-way fully-connected softmax layer with
//!    cross-entropy and Adam, and predicts class probabilities.
//! 5. [`metrics`] and [`aggregate`] turn predictions into frame metrics and
//!    per-zone / global Lung Ultrasound Scores.
//!
//! Head and metric math is generic over the floating-point scalar
//! ([`Scalar`]); the aliases below pin the 64-bit variants used by the
//! pipeline.

pub mod aggregate;
pub mod augment;
pub mod backbone;
pub mod config;
pub mod data;
pub mod error;
pub mod head;
pub mod metrics;
pub mod pipeline;
pub mod raster;
pub mod rng;
pub mod scalar;
pub mod synthetic;

pub use error::{Error, ErrorKind, Result};
pub use scalar::Scalar;

pub use data::{ImageRecord, SeverityScore, Zone};

/// Head parameters in 64-bit arithmetic (the pipeline default).
pub type HeadParams = head::HeadParameters<f64>;
/// Head parameters in 32-bit arithmetic.
pub type HeadParamsF32 = head::HeadParameters<f32>;
pub type AdamState = head::AdamState<f64>;
pub use head::TrainConfig;
pub type Prediction = head::Prediction<f64>;
pub type MetricsSummary = metrics::MetricsSummary<f64>;
pub type ConfusionMatrix = metrics::ConfusionMatrix<f64>;

/// Version string written into every artifact header.
pub const TOOL_VERSION: &str = concat!("lus ", env!("CARGO_PKG_VERSION"));
