//! First decomposition step: prompt an LLM once per aspect and parse its
//! answer into check-worthy parts.
//!
//! Answer grammar, after the aspect tag (`[ENT]:`, `[RELA]:`, ...):
//!
//! * existence: `(name, name, ...)`
//! * relation / attribute / count: `(a, b, c); (a, b); ...` with 3, 2 and 2
//!   fields respectively; count numbers are digits or `one`..`twenty`
//! * image text: `(text; text; ...)`
//! * any aspect: `NONE` (any case)
//!
//! Parsing is total: malformed pieces are dropped and reported as warnings.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::ExtractionError;
use crate::experts::TextGenerator;
use crate::prompts::{answer_tag, render_prompt};
use crate::types::{AspectKind, CheckWorthyPart};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionOutput {
    pub aspect: AspectKind,
    pub raw: String,
    pub parts: Vec<CheckWorthyPart>,
    pub parse_warnings: Vec<String>,
}

/// Result of running all five extractors over one description.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Extraction {
    /// Deduplicated, in aspect order then answer order.
    pub parts: Vec<CheckWorthyPart>,
    pub warnings: Vec<String>,
}

const NUMBER_WORDS: [&str; 20] = [
    "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven",
    "twelve", "thirteen", "fourteen", "fifteen", "sixteen", "seventeen", "eighteen", "nineteen",
    "twenty",
];

/// Parses a count slot: digit strings or the words one..twenty.
pub fn parse_count_number(s: &str) -> Option<u32> {
    let t = s.trim().to_lowercase();
    if !t.is_empty() && t.chars().all(|c| c.is_ascii_digit()) {
        return t.parse::<u32>().ok().filter(|&n| n >= 1);
    }
    NUMBER_WORDS
        .iter()
        .position(|w| *w == t)
        .map(|i| i as u32 + 1)
}

fn is_none_marker(s: &str) -> bool {
    let t = s.trim().trim_end_matches('.').trim();
    let t = t
        .strip_prefix('(')
        .and_then(|x| x.strip_suffix(')'))
        .unwrap_or(t)
        .trim();
    t.eq_ignore_ascii_case("none")
}

/// Finds the answer body: text after the last occurrence of the aspect tag,
/// up to the end of that line. Without a tag, falls back to the last line
/// that holds a parenthesized list or a NONE marker.
fn answer_body<'a>(aspect: AspectKind, raw: &'a str, warnings: &mut Vec<String>) -> Option<&'a str> {
    let tag = answer_tag(aspect);
    if let Some(pos) = raw.rfind(tag) {
        let rest = &raw[pos + tag.len()..];
        return Some(rest.lines().next().unwrap_or("").trim());
    }
    let fallback = raw
        .lines()
        .rev()
        .map(str::trim)
        .find(|l| l.contains('(') || is_none_marker(l));
    match fallback {
        Some(line) => {
            warnings.push(format!("no {tag} tag found; parsed tagless line {line:?}"));
            Some(line)
        }
        None => {
            if !raw.trim().is_empty() {
                warnings.push(format!("no {tag} tag or parenthesized list found"));
            }
            None
        }
    }
}

/// Strips one pair of surrounding parentheses, if present.
fn unwrap_parens(body: &str) -> Option<&str> {
    body.trim()
        .strip_prefix('(')
        .and_then(|b| b.trim_end().strip_suffix(')'))
}

/// Splits `(..); (..)` into group contents. Stray text and unclosed groups
/// become warnings.
fn tuple_groups(body: &str, warnings: &mut Vec<String>) -> Vec<String> {
    let mut groups = Vec::new();
    let mut stray = String::new();
    let mut current: Option<String> = None;
    for c in body.chars() {
        match (&mut current, c) {
            (None, '(') => {
                flush_stray(&mut stray, warnings);
                current = Some(String::new());
            }
            (None, c) => {
                // Separators only count once stray text has started.
                let separator = c.is_whitespace() || c == ';' || c == ',' || c == '.';
                if !separator || !stray.is_empty() {
                    stray.push(c);
                }
            }
            (Some(g), ')') => {
                groups.push(std::mem::take(g));
                current = None;
            }
            (Some(g), '(') => {
                warnings.push(format!("dropped tuple with nested parenthesis: ({g}("));
                g.clear();
            }
            (Some(g), c) => g.push(c),
        }
    }
    flush_stray(&mut stray, warnings);
    if let Some(g) = current {
        warnings.push(format!("dropped unclosed tuple: ({g}"));
    }
    groups
}

fn flush_stray(stray: &mut String, warnings: &mut Vec<String>) {
    let t = stray.trim();
    if !t.is_empty() {
        warnings.push(format!("ignored text outside tuples: {t:?}"));
    }
    stray.clear();
}

fn fields(group: &str, sep: char) -> Vec<&str> {
    group.split(sep).map(str::trim).collect()
}

fn parse_tuple(aspect: AspectKind, group: &str) -> Result<CheckWorthyPart, String> {
    let f = fields(group, ',');
    let part = match (aspect, f.as_slice()) {
        (AspectKind::Relation, [s, r, o]) => CheckWorthyPart::relation(s, r, o),
        (AspectKind::Attribute, [a, o]) => CheckWorthyPart::attribute(a, o),
        (AspectKind::Count, [n, o]) => {
            let number = parse_count_number(n)
                .ok_or_else(|| format!("dropped count tuple ({group}): {n:?} is not a number"))?;
            CheckWorthyPart::count(number, o)
        }
        _ => {
            return Err(format!(
                "dropped {aspect} tuple ({group}): expected {} fields, found {}",
                expected_fields(aspect),
                f.len()
            ))
        }
    };
    part.map_err(|e| format!("dropped {aspect} tuple ({group}): {e}"))
}

fn expected_fields(aspect: AspectKind) -> usize {
    match aspect {
        AspectKind::Relation => 3,
        AspectKind::Attribute | AspectKind::Count => 2,
        AspectKind::Existence | AspectKind::ImageText => 1,
    }
}

/// Parses one extractor answer. Never fails.
pub fn parse_extraction(aspect: AspectKind, raw: &str) -> ExtractionOutput {
    let mut warnings = Vec::new();
    let mut parts = Vec::new();
    if let Some(body) = answer_body(aspect, raw, &mut warnings) {
        if !is_none_marker(body) && !body.is_empty() {
            match aspect {
                AspectKind::Existence | AspectKind::ImageText => {
                    let inner = unwrap_parens(body).unwrap_or_else(|| {
                        warnings.push(format!("list is not parenthesized: {body:?}"));
                        body
                    });
                    let sep = if aspect == AspectKind::Existence { ',' } else { ';' };
                    for item in fields(inner, sep) {
                        let part = if aspect == AspectKind::Existence {
                            CheckWorthyPart::existence(item)
                        } else {
                            CheckWorthyPart::image_text(item)
                        };
                        match part {
                            Ok(p) => parts.push(p),
                            Err(e) => warnings.push(format!("dropped {aspect} item {item:?}: {e}")),
                        }
                    }
                }
                AspectKind::Relation | AspectKind::Attribute | AspectKind::Count => {
                    for g in tuple_groups(body, &mut warnings) {
                        match parse_tuple(aspect, &g) {
                            Ok(p) => parts.push(p),
                            Err(w) => warnings.push(w),
                        }
                    }
                }
            }
        }
    }
    ExtractionOutput {
        aspect,
        raw: raw.to_string(),
        parts,
        parse_warnings: warnings,
    }
}

/// Runs one extractor call: render, generate, parse.
pub fn extract_aspect(
    aspect: AspectKind,
    description: &str,
    generator: &dyn TextGenerator,
) -> Result<ExtractionOutput, ExtractionError> {
    let prompt = render_prompt(aspect, description);
    let raw = generator
        .generate(&prompt)
        .map_err(|source| ExtractionError::GeneratorUnavailable { aspect, source })?;
    Ok(parse_extraction(aspect, &raw))
}

/// Drops repeated parts, keeping the first occurrence.
pub fn dedup_parts(parts: impl IntoIterator<Item = CheckWorthyPart>) -> Vec<CheckWorthyPart> {
    let mut seen = HashSet::new();
    parts
        .into_iter()
        .filter(|p| seen.insert(p.clone()))
        .collect()
}

/// Both decomposition prompts for every aspect. The five generator calls run
/// concurrently; results merge in fixed aspect order. If several calls fail,
/// the error for the earliest aspect is reported.
pub fn extract_all(
    description: &str,
    generator: &dyn TextGenerator,
) -> Result<Extraction, ExtractionError> {
    let outputs: Vec<Result<ExtractionOutput, ExtractionError>> = AspectKind::ALL
        .par_iter()
        .map(|&aspect| extract_aspect(aspect, description, generator))
        .collect();
    let mut all_parts = Vec::new();
    let mut warnings = Vec::new();
    for out in outputs {
        let out = out?;
        warnings.extend(
            out.parse_warnings
                .into_iter()
                .map(|w| format!("{}: {w}", out.aspect)),
        );
        all_parts.extend(out.parts);
    }
    Ok(Extraction {
        parts: dedup_parts(all_parts),
        warnings,
    })
}
