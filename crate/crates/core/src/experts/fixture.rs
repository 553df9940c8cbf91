//! Deterministic in-memory backends for tests and offline runs.

use std::collections::HashMap;
use std::path::Path;

use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::error::ExpertError;
use crate::prompts::{in_context_examples, render_prompt};
use crate::types::{AspectKind, Detection, ImageRef};

use super::{Detector, FluencyScorer, TextGenerator};

/// Scores every question the same.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantFluency(pub f64);

impl FluencyScorer for ConstantFluency {
    fn score(&self, _text: &str) -> Result<f64, ExpertError> {
        Ok(self.0)
    }
}

/// Answers every prompt with the same text.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantGenerator(pub String);

impl TextGenerator for ConstantGenerator {
    fn generate(&self, _prompt: &str) -> Result<String, ExpertError> {
        Ok(self.0.clone())
    }
}

/// Detections looked up from a fixed `(image_id, entity)` table, with
/// arbitrary confidences.
#[derive(Debug, Clone, Default)]
pub struct FixtureDetector {
    table: HashMap<(String, String), Vec<Detection>>,
}

impl FixtureDetector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, image_id: &str, entity: &str, detections: Vec<Detection>) -> Self {
        self.table
            .insert((image_id.to_string(), crate::types::normalize(entity)), detections);
        self
    }
}

impl Detector for FixtureDetector {
    fn detect_all(&self, entity: &str, image: &ImageRef) -> Result<Vec<Detection>, ExpertError> {
        let key = (image.image_id.clone(), crate::types::normalize(entity));
        Ok(self.table.get(&key).cloned().unwrap_or_default())
    }
}

/// One recorded generator answer, keyed either by the (aspect, description)
/// that produced the prompt or by the SHA-256 of the prompt itself.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum ReplayEntry {
    Described {
        aspect: AspectKind,
        description: String,
        text: String,
    },
    Hashed {
        prompt_sha256: String,
        text: String,
    },
}

/// Replays recorded answers to known prompts.
#[derive(Debug, Clone, Default)]
pub struct ReplayGenerator {
    by_hash: HashMap<String, String>,
    fallback: Option<String>,
}

pub fn prompt_hash(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

impl ReplayGenerator {
    pub fn new(entries: impl IntoIterator<Item = ReplayEntry>) -> Self {
        let by_hash = entries
            .into_iter()
            .map(|e| match e {
                ReplayEntry::Described {
                    aspect,
                    description,
                    text,
                } => (prompt_hash(&render_prompt(aspect, &description)), text),
                ReplayEntry::Hashed {
                    prompt_sha256,
                    text,
                } => (prompt_sha256.to_ascii_lowercase(), text),
            })
            .collect();
        Self {
            by_hash,
            fallback: None,
        }
    }

    /// Reads a JSON array of entries.
    pub fn from_file(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let entries: Vec<ReplayEntry> =
            serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        Ok(Self::new(entries))
    }

    /// Answers each template's worked examples with their printed answers.
    pub fn from_in_context_examples() -> Self {
        Self::new(AspectKind::ALL.into_iter().flat_map(|aspect| {
            in_context_examples(aspect)
                .into_iter()
                .map(move |ex| ReplayEntry::Described {
                    aspect,
                    description: ex.description,
                    text: ex.answer,
                })
        }))
    }

    /// Text returned for prompts with no recorded answer, instead of an error.
    pub fn with_fallback(mut self, text: impl Into<String>) -> Self {
        self.fallback = Some(text.into());
        self
    }

    pub fn len(&self) -> usize {
        self.by_hash.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_hash.is_empty()
    }
}

impl TextGenerator for ReplayGenerator {
    fn generate(&self, prompt: &str) -> Result<String, ExpertError> {
        match self.by_hash.get(&prompt_hash(prompt)) {
            Some(t) => Ok(t.clone()),
            None => self.fallback.clone().ok_or_else(|| {
                ExpertError::unavailable("generator", "no recorded answer for prompt")
            }),
        }
    }
}
