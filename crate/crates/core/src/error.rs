use thiserror::Error;

use crate::types::AspectKind;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TypeError {
    #[error("invalid value: {0}")]
    Invalid(String),
}

/// Failure reported by an expert backend.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExpertError {
    #[error("{role} expert unavailable: {reason}")]
    Unavailable { role: &'static str, reason: String },
    #[error("no annotation for image {image_id}")]
    AnnotationMissing { image_id: String },
}

impl ExpertError {
    pub fn unavailable(role: &'static str, reason: impl Into<String>) -> Self {
        Self::Unavailable {
            role,
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExtractionError {
    #[error("text generator unavailable while extracting {aspect}: {source}")]
    GeneratorUnavailable {
        aspect: AspectKind,
        #[source]
        source: ExpertError,
    },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VerifyError {
    #[error("verification called with an empty detection list")]
    EmptyDetections,
    #[error("layout does not match its part: {0}")]
    LayoutMismatch(String),
    #[error(transparent)]
    Expert(#[from] ExpertError),
}

#[derive(Debug, Error)]
pub enum AnnotationError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("annotation {image_id}: {reason}")]
    Invalid { image_id: String, reason: String },
    #[error("duplicate annotation for image {0}")]
    Duplicate(String),
}

#[derive(Debug, Error)]
pub enum PreferenceError {
    #[error("response pool spans multiple images ({first} and {other})")]
    MixedImages { first: String, other: String },
    #[error("weights must be non-negative with at least one positive entry")]
    InvalidWeights,
    #[error("instruction id {0} has no entry in the instruction table")]
    UnknownInstruction(u8),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DpoError {
    #[error("batch is empty")]
    EmptyBatch,
    #[error("invalid DPO inputs: {0}")]
    InvalidInputs(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChairError {
    #[error("no annotation for image {0}")]
    AnnotationMissing(String),
}
