//! Expert backends: object detection, binary VQA, OCR, fluency scoring and
//! text generation.
//!
//! Every role is a trait so that ground-truth oracles, fixed tables and
//! remote HTTP services are interchangeable. Backends report raw results;
//! thresholding happens here, in the pipeline layer.

mod fixture;
mod oracle;
mod remote;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use crate::error::ExpertError;
use crate::types::{BBox, Detection, ImageRef};
pub use fixture::{ConstantFluency, ConstantGenerator, FixtureDetector, ReplayEntry, ReplayGenerator};
pub use oracle::{OracleDetector, OracleOcr, OracleVqa};
pub use remote::{RemoteClient, RemoteDetector, RemoteFluency, RemoteGenerator, RemoteOcr, RemoteVqa};

/// Pipeline constants for the expert layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExpertConfig {
    /// Detections with confidence at or above this value count.
    pub detection_threshold: f64,
    /// Templated questions scoring at or above this value go to VQA.
    pub fluency_threshold: f64,
    /// Extra factor on the Existence aspect weight.
    pub existence_weight_multiplier: f64,
    /// Compare scene text case-insensitively.
    pub ocr_case_insensitive: bool,
}

impl Default for ExpertConfig {
    fn default() -> Self {
        Self {
            detection_threshold: 0.25,
            fluency_threshold: 0.75,
            existence_weight_multiplier: 1.0,
            ocr_case_insensitive: false,
        }
    }
}

impl ExpertConfig {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("detection_threshold", self.detection_threshold),
            ("fluency_threshold", self.fluency_threshold),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(format!("{name} = {v} is outside [0, 1]"));
            }
        }
        if !(self.existence_weight_multiplier >= 0.0 && self.existence_weight_multiplier.is_finite())
        {
            return Err(format!(
                "existence_weight_multiplier = {} must be a finite non-negative number",
                self.existence_weight_multiplier
            ));
        }
        Ok(())
    }
}

/// Structured form of a yes/no question, for backends that check tuples
/// directly instead of reading the question text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StructuredHint {
    Relation {
        subject: String,
        relation: String,
        object: String,
    },
    Attribute {
        attribute: String,
        object: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VqaQuestion {
    pub text: String,
    pub structured: Option<StructuredHint>,
}

pub trait Detector: Send + Sync {
    /// All detections for `entity`, unfiltered, with confidences.
    fn detect_all(&self, entity: &str, image: &ImageRef) -> Result<Vec<Detection>, ExpertError>;
}

pub trait BinaryVqa: Send + Sync {
    fn ask(&self, question: &VqaQuestion, image: &ImageRef) -> Result<bool, ExpertError>;
}

pub trait OcrReader: Send + Sync {
    fn read_texts(&self, image: &ImageRef) -> Result<Vec<String>, ExpertError>;
}

pub trait FluencyScorer: Send + Sync {
    /// Fluency of `text` in `[0, 1]`.
    fn score(&self, text: &str) -> Result<f64, ExpertError>;
}

/// One prompt in, one completion out.
pub trait TextGenerator: Send + Sync {
    fn generate(&self, prompt: &str) -> Result<String, ExpertError>;
}

/// Boxes for `entity` whose confidence is at least `threshold`.
pub fn detect(
    detector: &dyn Detector,
    entity: &str,
    image: &ImageRef,
    threshold: f64,
) -> Result<Vec<BBox>, ExpertError> {
    Ok(detector
        .detect_all(entity, image)?
        .into_iter()
        .filter(|d| d.confidence >= threshold)
        .map(|d| d.bbox)
        .collect())
}

pub fn ask_yes_no(
    vqa: &dyn BinaryVqa,
    question: &VqaQuestion,
    image: &ImageRef,
) -> Result<bool, ExpertError> {
    vqa.ask(question, image)
}

pub fn read_texts(ocr: &dyn OcrReader, image: &ImageRef) -> Result<Vec<String>, ExpertError> {
    ocr.read_texts(image)
}

pub fn fluency(scorer: &dyn FluencyScorer, text: &str) -> Result<f64, ExpertError> {
    let s = scorer.score(text)?;
    if !(0.0..=1.0).contains(&s) {
        return Err(ExpertError::unavailable(
            "fluency",
            format!("score {s} outside [0, 1]"),
        ));
    }
    Ok(s)
}

/// Inclusive threshold test shared by detection and fluency gating.
pub fn passes_threshold(score: f64, threshold: f64) -> bool {
    score >= threshold
}

/// A yes/no answer counts as affirmative when its first word is "yes",
/// ignoring case and trailing punctuation ("Yes." and "yes, it is" both
/// count).
pub fn is_affirmative(answer: &str) -> bool {
    answer
        .split_whitespace()
        .next()
        .map(|w| {
            w.trim_matches(|c: char| !c.is_alphanumeric())
                .eq_ignore_ascii_case("yes")
        })
        .unwrap_or(false)
}

/// The verification-side expert roles bundled together.
#[derive(Clone)]
pub struct Experts {
    pub detector: Arc<dyn Detector>,
    pub vqa: Arc<dyn BinaryVqa>,
    pub ocr: Arc<dyn OcrReader>,
    pub fluency: Arc<dyn FluencyScorer>,
}

impl Experts {
    /// Ground-truth backends for every role, with a constant fluency of 1.0.
    pub fn oracle(store: Arc<crate::annotation::AnnotationStore>) -> Self {
        Self {
            detector: Arc::new(OracleDetector::new(store.clone())),
            vqa: Arc::new(OracleVqa::new(store.clone())),
            ocr: Arc::new(OracleOcr::new(store)),
            fluency: Arc::new(ConstantFluency(1.0)),
        }
    }
}

impl std::fmt::Debug for Experts {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Experts").finish_non_exhaustive()
    }
}
