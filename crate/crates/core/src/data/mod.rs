//! Frame labels, scanning zones, the manifest table and patient-level folds.

mod folds;
mod manifest;
mod severity;
mod zone;

pub use folds::{make_folds, FoldPlan};
pub use manifest::{
    class_histogram, load_manifest, parse_manifest, write_manifest, CovidStatus, ImageRecord,
    MANIFEST_HEADER,
};
pub use severity::SeverityScore;
pub use zone::{Aspect, Level, Side, Zone};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: malformed row: {reason}")]
    MalformedRow { line: usize, reason: String },

    #[error("line {line}: invalid severity score {value:?} (expected 0, 1, 2 or 3)")]
    InvalidScore { line: usize, value: String },

    #[error("line {line}: duplicate image_id {image_id:?}")]
    DuplicateImageId { line: usize, image_id: String },

    #[error("line {line}: unknown zone {value:?}")]
    UnknownZone { line: usize, value: String },

    #[error("line {line}: patient {patient_id:?} listed as both positive and healthy")]
    ContradictoryStatus { line: usize, patient_id: String },

    #[error("too few patients: {status} group has {found} patients, need at least {k} for {k} folds")]
    TooFewPatients {
        status: CovidStatus,
        found: usize,
        k: usize,
    },

    #[error("fold count must be at least 2, got {0}")]
    InvalidFoldCount(usize),

    #[error("{0}")]
    Invalid(String),
}
