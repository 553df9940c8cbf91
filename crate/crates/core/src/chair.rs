//! CHAIR object-hallucination rates.
//!
//! * `chair_i` = hallucinated mentions / all mentions
//! * `chair_s` = responses with at least one hallucinated mention / responses
//!
//! A mention is hallucinated when its canonical name is not among the
//! image's annotated objects.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::annotation::{AnnotationStore, SceneAnnotation};
use crate::error::ChairError;
use crate::types::normalize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseChair {
    pub response_id: String,
    pub mentions: usize,
    pub hallucinated: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChairReport {
    pub chair_s: f64,
    pub chair_i: f64,
    pub per_response: Vec<ResponseChair>,
}

/// Object mentions of one response, ready for scoring.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MentionSet {
    pub response_id: String,
    pub image_id: String,
    pub mentions: Vec<String>,
}

/// Ground-truth object names for one image, with the synonym map used to
/// canonicalize mentions.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GroundTruthObjects {
    pub objects: BTreeSet<String>,
    pub synonyms: BTreeMap<String, String>,
}

impl GroundTruthObjects {
    pub fn canonical(&self, name: &str) -> String {
        let n = normalize(name);
        self.synonyms.get(&n).cloned().unwrap_or(n)
    }
}

impl From<&SceneAnnotation> for GroundTruthObjects {
    fn from(a: &SceneAnnotation) -> Self {
        Self {
            objects: a.object_names(),
            synonyms: a.synonyms.clone(),
        }
    }
}

/// Canonicalizes extracted entity names. Duplicates are kept: each mention
/// counts.
pub fn object_mentions(entities: &[String], synonyms: &BTreeMap<String, String>) -> Vec<String> {
    entities
        .iter()
        .map(|e| {
            let n = normalize(e);
            synonyms.get(&n).cloned().unwrap_or(n)
        })
        .filter(|m| !m.is_empty())
        .collect()
}

pub fn chair(
    corpus: &[MentionSet],
    ground_truth: &BTreeMap<String, GroundTruthObjects>,
) -> Result<ChairReport, ChairError> {
    let mut per_response = Vec::with_capacity(corpus.len());
    for item in corpus {
        let gt = ground_truth
            .get(&item.image_id)
            .ok_or_else(|| ChairError::AnnotationMissing(item.image_id.clone()))?;
        let hallucinated = item
            .mentions
            .iter()
            .filter(|m| !gt.objects.contains(&gt.canonical(m)))
            .count();
        per_response.push(ResponseChair {
            response_id: item.response_id.clone(),
            mentions: item.mentions.len(),
            hallucinated,
        });
    }
    let total_mentions: usize = per_response.iter().map(|r| r.mentions).sum();
    let total_hallucinated: usize = per_response.iter().map(|r| r.hallucinated).sum();
    let bad_responses = per_response.iter().filter(|r| r.hallucinated > 0).count();
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    Ok(ChairReport {
        chair_s: ratio(bad_responses, per_response.len()),
        chair_i: ratio(total_hallucinated, total_mentions),
        per_response,
    })
}

/// Ground-truth object sets for the images of `corpus`, drawn from `store`.
pub fn ground_truth_for(
    corpus: &[MentionSet],
    store: &AnnotationStore,
) -> Result<BTreeMap<String, GroundTruthObjects>, ChairError> {
    let mut out = BTreeMap::new();
    for item in corpus {
        if out.contains_key(&item.image_id) {
            continue;
        }
        let ann = store
            .get(&item.image_id)
            .ok_or_else(|| ChairError::AnnotationMissing(item.image_id.clone()))?;
        out.insert(item.image_id.clone(), GroundTruthObjects::from(ann));
    }
    Ok(out)
}
