//! Response scoring, pool ranking and preference-pair export.
//!
//! A response's overall score is the weighted mean of its scorable part
//! scores (0 faithful, -1 problematic), weighting each part by its aspect:
//!
//! ```text
//! overall = sum_i w(aspect_i) * score_i / sum_i w(aspect_i)   over non-skipped parts
//! ```
//!
//! with 0 when nothing is scorable.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::PreferenceError;
use crate::prompts::instruction;
use crate::types::{AspectKind, ImageRef, PartAssessment, PreferencePair, Response, ResponseAssessment};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<AspectKind, f64>", into = "BTreeMap<AspectKind, f64>")]
pub struct AspectWeights {
    weights: BTreeMap<AspectKind, f64>,
}

impl Default for AspectWeights {
    fn default() -> Self {
        Self {
            weights: AspectKind::ALL.iter().map(|&a| (a, 1.0)).collect(),
        }
    }
}

impl TryFrom<BTreeMap<AspectKind, f64>> for AspectWeights {
    type Error = PreferenceError;

    /// Aspects missing from the map default to 1.0.
    fn try_from(map: BTreeMap<AspectKind, f64>) -> Result<Self, Self::Error> {
        let mut w = Self::default();
        for (a, v) in map {
            w.weights.insert(a, v);
        }
        w.validate()?;
        Ok(w)
    }
}

impl From<AspectWeights> for BTreeMap<AspectKind, f64> {
    fn from(w: AspectWeights) -> Self {
        w.weights
    }
}

impl AspectWeights {
    /// Uniform weights with existence errors counted twice.
    pub fn qwen() -> Self {
        let mut w = Self::default();
        w.weights.insert(AspectKind::Existence, 2.0);
        w
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "default" | "uniform" => Some(Self::default()),
            "qwen" => Some(Self::qwen()),
            _ => None,
        }
    }

    pub fn get(&self, aspect: AspectKind) -> f64 {
        self.weights.get(&aspect).copied().unwrap_or(1.0)
    }

    pub fn set(&mut self, aspect: AspectKind, weight: f64) -> Result<(), PreferenceError> {
        let old = self.weights.insert(aspect, weight);
        if let Err(e) = self.validate() {
            match old {
                Some(v) => self.weights.insert(aspect, v),
                None => self.weights.remove(&aspect),
            };
            return Err(e);
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), PreferenceError> {
        let ok = self.weights.values().all(|w| w.is_finite() && *w >= 0.0)
            && self.weights.values().any(|w| *w > 0.0);
        if ok {
            Ok(())
        } else {
            Err(PreferenceError::InvalidWeights)
        }
    }

    /// Copy with the existence weight scaled by `m`.
    pub fn with_existence_multiplier(&self, m: f64) -> Self {
        let mut w = self.clone();
        w.weights
            .insert(AspectKind::Existence, self.get(AspectKind::Existence) * m);
        w
    }
}

/// Weighted mean over scorable parts, and whether any part was scorable
/// with positive weight.
pub fn overall_score_detailed(parts: &[PartAssessment], weights: &AspectWeights) -> (f64, bool) {
    let mut num = 0.0;
    let mut den = 0.0;
    for p in parts {
        if let Some(score) = p.verdict.score() {
            let w = weights.get(p.aspect());
            num += w * score;
            den += w;
        }
    }
    if den > 0.0 {
        // Clamp guards against -1.0000000000000002 style rounding.
        ((num / den).clamp(-1.0, 0.0), true)
    } else {
        (0.0, false)
    }
}

pub fn overall_score(assessment: &ResponseAssessment, weights: &AspectWeights) -> f64 {
    overall_score_detailed(&assessment.parts, weights).0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PairOptions {
    /// Keep at most this many pairs per image, preferring the largest score
    /// margins. Off by default.
    pub max_pairs_per_image: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PairBatch {
    pub pairs: Vec<PreferencePair>,
    pub ties_dropped: usize,
    pub capped: usize,
}

/// Every pool pair with distinct overall scores, oriented higher to lower.
pub fn build_pairs(pool: &[(Response, ResponseAssessment)]) -> Result<Vec<PreferencePair>, PreferenceError> {
    Ok(build_pairs_with(pool, &PairOptions::default())?.pairs)
}

pub fn build_pairs_with(
    pool: &[(Response, ResponseAssessment)],
    options: &PairOptions,
) -> Result<PairBatch, PreferenceError> {
    let Some((first, _)) = pool.first() else {
        return Ok(PairBatch::default());
    };
    if let Some((other, _)) = pool.iter().find(|(r, _)| r.image.image_id != first.image.image_id) {
        return Err(PreferenceError::MixedImages {
            first: first.image.image_id.clone(),
            other: other.image.image_id.clone(),
        });
    }
    let mut ties = 0;
    // (pref index, rej index)
    let mut oriented: Vec<(usize, usize)> = Vec::new();
    for i in 0..pool.len() {
        for j in i + 1..pool.len() {
            let (si, sj) = (pool[i].1.overall, pool[j].1.overall);
            if si > sj {
                oriented.push((i, j));
            } else if sj > si {
                oriented.push((j, i));
            } else {
                ties += 1;
            }
        }
    }
    let mut capped = 0;
    if let Some(cap) = options.max_pairs_per_image {
        if oriented.len() > cap {
            let margin = |&(p, r): &(usize, usize)| pool[p].1.overall - pool[r].1.overall;
            // Stable sort keeps (pref, rej) order among equal margins.
            oriented.sort_unstable();
            oriented.sort_by(|a, b| margin(b).total_cmp(&margin(a)));
            capped = oriented.len() - cap;
            oriented.truncate(cap);
        }
    }
    oriented.sort_unstable();
    let pairs = oriented
        .into_iter()
        .map(|(p, r)| {
            let (pr, pa) = &pool[p];
            let (rr, ra) = &pool[r];
            PreferencePair {
                image: pr.image.clone(),
                instruction_id_pref: pr.instruction_id,
                instruction_id_rej: rr.instruction_id,
                pref_text: pr.text.clone(),
                rej_text: rr.text.clone(),
                score_pref: pa.overall,
                score_rej: ra.overall,
            }
        })
        .collect();
    Ok(PairBatch {
        pairs,
        ties_dropped: ties,
        capped,
    })
}

/// One line of the preference dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub image_id: String,
    pub image_width: u32,
    pub image_height: u32,
    pub instruction_id_pref: u8,
    pub instruction_id_rej: u8,
    pub prompt_pref: String,
    pub prompt_rej: String,
    pub chosen: String,
    pub rejected: String,
    pub score_pref: f64,
    pub score_rej: f64,
}

impl PairRecord {
    pub fn from_pair(p: &PreferencePair) -> Result<Self, PreferenceError> {
        let prompt = |id| {
            instruction(id)
                .map(str::to_string)
                .ok_or(PreferenceError::UnknownInstruction(id))
        };
        Ok(Self {
            image_id: p.image.image_id.clone(),
            image_width: p.image.width,
            image_height: p.image.height,
            instruction_id_pref: p.instruction_id_pref,
            instruction_id_rej: p.instruction_id_rej,
            prompt_pref: prompt(p.instruction_id_pref)?,
            prompt_rej: prompt(p.instruction_id_rej)?,
            chosen: p.pref_text.clone(),
            rejected: p.rej_text.clone(),
            score_pref: p.score_pref,
            score_rej: p.score_rej,
        })
    }

    pub fn into_pair(self) -> PreferencePair {
        PreferencePair {
            image: ImageRef {
                image_id: self.image_id,
                width: self.image_width,
                height: self.image_height,
            },
            instruction_id_pref: self.instruction_id_pref,
            instruction_id_rej: self.instruction_id_rej,
            pref_text: self.chosen,
            rej_text: self.rejected,
            score_pref: self.score_pref,
            score_rej: self.score_rej,
        }
    }
}

/// Appends pairs as JSON lines to `out`.
pub fn write_pairs<W: Write>(pairs: &[PreferencePair], mut out: W) -> Result<usize, PreferenceError> {
    for p in pairs {
        serde_json::to_writer(&mut out, &PairRecord::from_pair(p)?)?;
        out.write_all(b"\n")?;
    }
    Ok(pairs.len())
}

/// Writes the dataset file, replacing any existing one. Returns the number
/// of lines written.
pub fn export_pairs(pairs: &[PreferencePair], path: &Path) -> Result<usize, PreferenceError> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    let n = write_pairs(pairs, &mut w)?;
    w.flush()?;
    Ok(n)
}

pub fn read_pairs(path: &Path) -> Result<Vec<PreferencePair>, PreferenceError> {
    let file = std::fs::File::open(path)?;
    let mut out = Vec::new();
    for line in std::io::BufReader::new(file).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: PairRecord = serde_json::from_str(&line)?;
        out.push(rec.into_pair());
    }
    Ok(out)
}
