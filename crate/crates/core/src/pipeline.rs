//! Line-oriented batch workflows behind the CLI subcommands.
//!
//! Inputs are read as consecutive groups of lines that share an image, a
//! window of groups is processed on a worker pool, and results are written
//! in input order, so output bytes do not depend on the worker count.

use std::collections::HashSet;
use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotation::AnnotationStore;
use crate::chair::{chair, ground_truth_for, object_mentions, ChairReport, MentionSet};
use crate::dpo::{batch_stats, DpoInputs, DpoStats};
use crate::error::{ChairError, DpoError, ExpertError, ExtractionError, PreferenceError, VerifyError};
use crate::experts::{ExpertConfig, Experts, TextGenerator};
use crate::extraction::extract_all;
use crate::preference::{build_pairs_with, write_pairs, AspectWeights, PairOptions};
use crate::types::{CheckWorthyPart, ImageRef, PartAssessment, Response, ResponseAssessment};
use crate::verify::assess_response;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("input line {line}: {message}")]
    Input { line: usize, message: String },
    #[error(transparent)]
    Extraction(#[from] ExtractionError),
    #[error(transparent)]
    Expert(ExpertError),
    #[error(transparent)]
    Preference(#[from] PreferenceError),
    #[error(transparent)]
    Chair(#[from] ChairError),
    #[error(transparent)]
    Dpo(#[from] DpoError),
    #[error("worker pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl PipelineError {
    /// True when the failure came from an expert or generator backend
    /// rather than from the inputs or configuration.
    pub fn is_backend_failure(&self) -> bool {
        matches!(self, Self::Extraction(_) | Self::Expert(_))
    }
}

/// One line of `extract` output (and `verify` input).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractRecord {
    #[serde(flatten)]
    pub response: Response,
    pub parts: Vec<CheckWorthyPart>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

/// One line of `verify` output (and `build-pref` input).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssessmentRecord {
    pub response_id: String,
    pub image: ImageRef,
    pub instruction_id: u8,
    pub text: String,
    pub parts: Vec<PartAssessment>,
    pub overall: f64,
    #[serde(default)]
    pub no_checkworthy_content: bool,
    #[serde(default)]
    pub no_scorable_parts: bool,
}

impl AssessmentRecord {
    pub fn new(response: Response, a: ResponseAssessment) -> Self {
        Self {
            response_id: a.response_id,
            image: response.image,
            instruction_id: response.instruction_id,
            text: response.text,
            parts: a.parts,
            overall: a.overall,
            no_checkworthy_content: a.no_checkworthy_content,
            no_scorable_parts: a.no_scorable_parts,
        }
    }

    pub fn split(self) -> (Response, ResponseAssessment) {
        (
            Response {
                response_id: self.response_id.clone(),
                image: self.image,
                instruction_id: self.instruction_id,
                text: self.text,
            },
            ResponseAssessment {
                response_id: self.response_id,
                parts: self.parts,
                overall: self.overall,
                no_checkworthy_content: self.no_checkworthy_content,
                no_scorable_parts: self.no_scorable_parts,
            },
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct ExtractSummary {
    pub responses: usize,
    pub parts: usize,
    pub warnings: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct VerifySummary {
    pub responses: usize,
    pub skipped_responses: usize,
    /// Images skipped because no annotation exists for them.
    pub missing_annotation_images: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct PrefSummary {
    pub images: usize,
    pub responses: usize,
    pub pairs: usize,
    pub ties_dropped: usize,
    pub capped: usize,
}

/// Worker pool settings shared by the batch runners.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Workers {
    pub threads: usize,
    /// Image groups processed per window.
    pub window: usize,
}

impl Workers {
    pub fn new(threads: usize) -> Self {
        let threads = threads.max(1);
        Self {
            threads,
            window: threads * 4,
        }
    }

    fn pool(&self) -> Result<rayon::ThreadPool, PipelineError> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.threads)
            .build()
            .map_err(|e| PipelineError::Pool(e.to_string()))
    }
}

impl Default for Workers {
    fn default() -> Self {
        Self::new(1)
    }
}

struct Numbered<T> {
    line: usize,
    value: T,
}

/// Parses nonblank JSON lines, keeping 1-based line numbers.
fn json_lines<T: DeserializeOwned, R: BufRead>(
    input: R,
) -> impl Iterator<Item = Result<Numbered<T>, PipelineError>> {
    input.lines().enumerate().filter_map(|(i, line)| {
        let line_no = i + 1;
        match line {
            Err(e) => Some(Err(e.into())),
            Ok(l) if l.trim().is_empty() => None,
            Ok(l) => Some(
                serde_json::from_str(&l)
                    .map(|value| Numbered { line: line_no, value })
                    .map_err(|e| PipelineError::Input {
                        line: line_no,
                        message: e.to_string(),
                    }),
            ),
        }
    })
}

/// Groups consecutive items with equal keys, yielding windows of at most
/// `window` groups. With `strict`, a key reappearing after its group ended
/// is an input error.
fn grouped_windows<T, I, K>(
    items: I,
    key: K,
    window: usize,
    strict: bool,
) -> impl Iterator<Item = Result<Vec<Vec<Numbered<T>>>, PipelineError>>
where
    I: Iterator<Item = Result<Numbered<T>, PipelineError>>,
    K: Fn(&T) -> String,
{
    let mut items = items.peekable();
    let mut closed: HashSet<String> = HashSet::new();
    let mut current: Vec<Numbered<T>> = Vec::new();
    let mut current_key: Option<String> = None;
    let mut done = false;
    std::iter::from_fn(move || {
        if done {
            return None;
        }
        let mut groups = Vec::new();
        loop {
            match items.next() {
                None => {
                    done = true;
                    if !current.is_empty() {
                        groups.push(std::mem::take(&mut current));
                    }
                    return if groups.is_empty() { None } else { Some(Ok(groups)) };
                }
                Some(Err(e)) => {
                    done = true;
                    return Some(Err(e));
                }
                Some(Ok(item)) => {
                    let k = key(&item.value);
                    if current_key.as_ref() != Some(&k) {
                        if let Some(prev) = current_key.replace(k.clone()) {
                            closed.insert(prev);
                        }
                        if strict && closed.contains(&k) {
                            done = true;
                            return Some(Err(PipelineError::Input {
                                line: item.line,
                                message: format!("image {k} appears again after its group ended; input must be grouped by image"),
                            }));
                        }
                        if !current.is_empty() {
                            groups.push(std::mem::take(&mut current));
                        }
                    }
                    current.push(item);
                    if groups.len() >= window {
                        return Some(Ok(groups));
                    }
                }
            }
        }
    })
}

fn write_json_line<W: Write, T: Serialize>(out: &mut W, value: &T) -> Result<(), PipelineError> {
    serde_json::to_writer(&mut *out, value)?;
    out.write_all(b"\n")?;
    Ok(())
}

fn validated_response(line: usize, r: &Response) -> Result<(), PipelineError> {
    r.validate().map_err(|e| PipelineError::Input {
        line,
        message: e.to_string(),
    })
}

/// `extract`: responses JSONL in, one [`ExtractRecord`] per response out.
pub fn run_extract<R: BufRead, W: Write>(
    input: R,
    mut output: W,
    generator: &dyn TextGenerator,
    workers: Workers,
) -> Result<ExtractSummary, PipelineError> {
    let pool = workers.pool()?;
    let mut summary = ExtractSummary::default();
    let lines = json_lines::<Response, _>(input);
    for window in grouped_windows(lines, |r: &Response| r.image.image_id.clone(), workers.window, false) {
        let items: Vec<Numbered<Response>> = window?.into_iter().flatten().collect();
        for item in &items {
            validated_response(item.line, &item.value)?;
        }
        let results: Vec<_> = pool.install(|| {
            items
                .par_iter()
                .map(|item| extract_all(&item.value.text, generator))
                .collect()
        });
        for (item, result) in items.into_iter().zip(results) {
            let extraction = result?;
            summary.responses += 1;
            summary.parts += extraction.parts.len();
            summary.warnings += extraction.warnings.len();
            write_json_line(
                &mut output,
                &ExtractRecord {
                    response: item.value,
                    parts: extraction.parts,
                    warnings: extraction.warnings,
                },
            )?;
        }
    }
    output.flush()?;
    Ok(summary)
}

/// `verify`: extraction records in, one [`AssessmentRecord`] per response
/// out. Images without annotations are skipped and counted; any other
/// expert failure aborts the run.
pub fn run_verify<R: BufRead, W: Write>(
    input: R,
    mut output: W,
    experts: &Experts,
    config: &ExpertConfig,
    weights: &AspectWeights,
    workers: Workers,
) -> Result<VerifySummary, PipelineError> {
    let pool = workers.pool()?;
    let mut summary = VerifySummary::default();
    let mut missing: HashSet<String> = HashSet::new();
    let lines = json_lines::<ExtractRecord, _>(input);
    let key = |r: &ExtractRecord| r.response.image.image_id.clone();
    for window in grouped_windows(lines, key, workers.window, false) {
        let mut groups = window?;
        for item in groups.iter_mut().flatten() {
            validated_response(item.line, &item.value.response)?;
            item.value.parts = item
                .value
                .parts
                .iter()
                .map(CheckWorthyPart::normalized)
                .collect::<Result<_, _>>()
                .map_err(|e| PipelineError::Input {
                    line: item.line,
                    message: e.to_string(),
                })?;
        }
        let results: Vec<Result<Vec<ResponseAssessment>, VerifyError>> = pool.install(|| {
            groups
                .par_iter()
                .map(|group| {
                    group
                        .iter()
                        .map(|item| {
                            assess_response(&item.value.response, &item.value.parts, experts, config, weights)
                        })
                        .collect()
                })
                .collect()
        });
        for (group, result) in groups.into_iter().zip(results) {
            match result {
                Ok(assessments) => {
                    for (item, a) in group.into_iter().zip(assessments) {
                        summary.responses += 1;
                        write_json_line(&mut output, &AssessmentRecord::new(item.value.response, a))?;
                    }
                }
                Err(VerifyError::Expert(ExpertError::AnnotationMissing { image_id })) => {
                    log::warn!("no annotation for image {image_id}; skipping {} response(s)", group.len());
                    summary.skipped_responses += group.len();
                    missing.insert(image_id);
                }
                Err(VerifyError::Expert(e)) => return Err(PipelineError::Expert(e)),
                Err(e) => {
                    return Err(PipelineError::Input {
                        line: group[0].line,
                        message: e.to_string(),
                    })
                }
            }
        }
    }
    summary.missing_annotation_images = missing.len();
    output.flush()?;
    Ok(summary)
}

/// `build-pref`: assessment records (grouped by image) in, preference
/// JSONL out.
pub fn run_build_pref<R: BufRead, W: Write>(
    input: R,
    mut output: W,
    options: &PairOptions,
) -> Result<PrefSummary, PipelineError> {
    let mut summary = PrefSummary::default();
    let lines = json_lines::<AssessmentRecord, _>(input);
    for window in grouped_windows(lines, |r: &AssessmentRecord| r.image.image_id.clone(), 64, true) {
        for group in window? {
            let pool: Vec<(Response, ResponseAssessment)> = group
                .into_iter()
                .map(|item| {
                    validated_response(item.line, &Response {
                        response_id: item.value.response_id.clone(),
                        image: item.value.image.clone(),
                        instruction_id: item.value.instruction_id,
                        text: item.value.text.clone(),
                    })?;
                    if !(-1.0..=0.0).contains(&item.value.overall) {
                        return Err(PipelineError::Input {
                            line: item.line,
                            message: format!("overall score {} outside [-1, 0]", item.value.overall),
                        });
                    }
                    Ok(item.value.split())
                })
                .collect::<Result<_, PipelineError>>()?;
            let batch = build_pairs_with(&pool, options)?;
            summary.images += 1;
            summary.responses += pool.len();
            summary.pairs += batch.pairs.len();
            summary.ties_dropped += batch.ties_dropped;
            summary.capped += batch.capped;
            write_pairs(&batch.pairs, &mut output)?;
        }
    }
    output.flush()?;
    Ok(summary)
}

#[derive(Debug, Deserialize)]
struct ChairLine {
    response_id: String,
    #[serde(default)]
    image_id: Option<String>,
    #[serde(default)]
    image: Option<ImageRef>,
    #[serde(default)]
    mentions: Option<Vec<String>>,
    #[serde(default)]
    parts: Option<Vec<CheckWorthyPart>>,
}

/// `eval-chair`: reads extraction records (or lines carrying an explicit
/// `mentions` array) and scores them against the annotations.
pub fn run_eval_chair<R: BufRead>(input: R, store: &AnnotationStore) -> Result<ChairReport, PipelineError> {
    let mut corpus = Vec::new();
    for item in json_lines::<ChairLine, _>(input) {
        let Numbered { line, value } = item?;
        let image_id = value
            .image_id
            .or(value.image.map(|i| i.image_id))
            .ok_or_else(|| PipelineError::Input {
                line,
                message: "missing image_id".into(),
            })?;
        let entities: Vec<String> = match (value.mentions, value.parts) {
            (Some(m), _) => m,
            (None, Some(parts)) => parts
                .into_iter()
                .filter_map(|p| match p {
                    CheckWorthyPart::Existence { entity } => Some(entity),
                    _ => None,
                })
                .collect(),
            (None, None) => {
                return Err(PipelineError::Input {
                    line,
                    message: "expected `mentions` or `parts`".into(),
                })
            }
        };
        let ann = store
            .get(&image_id)
            .ok_or_else(|| ChairError::AnnotationMissing(image_id.clone()))?;
        corpus.push(MentionSet {
            response_id: value.response_id,
            image_id,
            mentions: object_mentions(&entities, &ann.synonyms),
        });
    }
    let gt = ground_truth_for(&corpus, store)?;
    Ok(chair(&corpus, &gt)?)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DpoLine {
    logp_policy_pref: f64,
    logp_ref_pref: f64,
    logp_policy_rej: f64,
    logp_ref_rej: f64,
    #[serde(default)]
    beta: Option<f64>,
}

/// `dpo-check`: JSONL of [`DpoInputs`] in, loss statistics out. Lines
/// without a `beta` use `default_beta`.
pub fn run_dpo_check<R: BufRead>(input: R, default_beta: f64) -> Result<DpoStats, PipelineError> {
    let mut batch = Vec::new();
    for item in json_lines::<DpoLine, _>(input) {
        let Numbered { line, value } = item?;
        let inputs = DpoInputs {
            logp_policy_pref: value.logp_policy_pref,
            logp_ref_pref: value.logp_ref_pref,
            logp_policy_rej: value.logp_policy_rej,
            logp_ref_rej: value.logp_ref_rej,
            beta: value.beta.unwrap_or(default_beta),
        };
        inputs.validate().map_err(|e| PipelineError::Input {
            line,
            message: e.to_string(),
        })?;
        batch.push(inputs);
    }
    Ok(batch_stats(&batch)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nums(keys: &[&str]) -> Vec<Result<Numbered<String>, PipelineError>> {
        keys.iter()
            .enumerate()
            .map(|(i, k)| Ok(Numbered { line: i + 1, value: k.to_string() }))
            .collect()
    }

    fn shape(keys: &[&str], window: usize, strict: bool) -> Result<Vec<Vec<usize>>, PipelineError> {
        grouped_windows(nums(keys).into_iter(), |s: &String| s.clone(), window, strict)
            .map(|w| w.map(|groups| groups.iter().map(Vec::len).collect()))
            .collect()
    }

    #[test]
    fn windows_group_consecutive_keys() {
        assert_eq!(shape(&["a", "a", "b", "c", "c", "c"], 8, true).unwrap(), vec![vec![2, 1, 3]]);
        assert_eq!(shape(&["a", "a", "b", "c"], 1, true).unwrap(), vec![vec![2], vec![1], vec![1]]);
        assert_eq!(shape(&[], 4, true).unwrap(), Vec::<Vec<usize>>::new());
    }

    #[test]
    fn strict_grouping_rejects_reappearing_keys() {
        assert!(shape(&["a", "b", "a"], 8, true).is_err());
        assert_eq!(shape(&["a", "b", "a"], 8, false).unwrap(), vec![vec![1, 1, 1]]);
    }

    #[test]
    fn dpo_check_rejects_bad_lines() {
        let input = b"{\"logp_policy_pref\":-1,\"logp_ref_pref\":-1,\"logp_policy_rej\":-1,\"logp_ref_rej\":-1}\n\n";
        let s = run_dpo_check(&input[..], 0.1).unwrap();
        assert_eq!(s.count, 1);
        assert!((s.mean_loss - std::f64::consts::LN_2).abs() < 1e-12);
        assert!(matches!(run_dpo_check(&b"{"[..], 0.1), Err(PipelineError::Input { line: 1, .. })));
        assert!(matches!(run_dpo_check(&b""[..], 0.1), Err(PipelineError::Dpo(DpoError::EmptyBatch))));
        let zero_beta = b"{\"logp_policy_pref\":-1,\"logp_ref_pref\":-1,\"logp_policy_rej\":-1,\"logp_ref_rej\":-1,\"beta\":0}";
        assert!(matches!(run_dpo_check(&zero_beta[..], 0.1), Err(PipelineError::Input { line: 1, .. })));
    }

    #[test]
    fn dpo_check_applies_default_beta() {
        let line = b"{\"logp_policy_pref\":-1,\"logp_ref_pref\":-2,\"logp_policy_rej\":-2,\"logp_ref_rej\":-1}";
        let a = run_dpo_check(&line[..], 0.1).unwrap();
        let b = run_dpo_check(&line[..], 1.0).unwrap();
        assert!((a.mean_reward_margin - 0.2).abs() < 1e-15);
        assert!((b.mean_reward_margin - 2.0).abs() < 1e-15);
    }
}
