//! Extraction prompt templates and the description-instruction table.
//!
//! Templates are stored verbatim under `fixtures/prompts/`, each ending in a
//! single `{description}` placeholder.

use crate::types::AspectKind;

pub const PLACEHOLDER: &str = "{description}";

const EXISTENCE: &str = include_str!("../fixtures/prompts/existence.txt");
const RELATION: &str = include_str!("../fixtures/prompts/relation.txt");
const ATTRIBUTE: &str = include_str!("../fixtures/prompts/attribute.txt");
const COUNT: &str = include_str!("../fixtures/prompts/count.txt");
const IMAGE_TEXT: &str = include_str!("../fixtures/prompts/image_text.txt");
const INSTRUCTIONS: &str = include_str!("../fixtures/instructions.txt");

/// Raw template text for an aspect, placeholder included.
pub fn template(aspect: AspectKind) -> &'static str {
    match aspect {
        AspectKind::Existence => EXISTENCE,
        AspectKind::Relation => RELATION,
        AspectKind::Attribute => ATTRIBUTE,
        AspectKind::Count => COUNT,
        AspectKind::ImageText => IMAGE_TEXT,
    }
}

/// The answer tag the extractor is asked to emit for an aspect.
pub fn answer_tag(aspect: AspectKind) -> &'static str {
    match aspect {
        AspectKind::Existence => "[ENT]:",
        AspectKind::Relation => "[RELA]:",
        AspectKind::Attribute => "[ATTR]:",
        AspectKind::Count => "[COUNT]:",
        AspectKind::ImageText => "[TEXT]:",
    }
}

/// Substitutes `description` for the trailing placeholder. Everything else
/// is returned byte-for-byte.
pub fn render_prompt(aspect: AspectKind, description: &str) -> String {
    let t = template(aspect);
    let head = t
        .strip_suffix(PLACEHOLDER)
        .expect("prompt fixture must end with the description placeholder");
    let mut out = String::with_capacity(head.len() + description.len());
    out.push_str(head);
    out.push_str(description);
    out
}

/// One worked example embedded in a template.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InContextExample {
    pub description: String,
    /// The full answer line, tag included (e.g. `[COUNT]: (five, potted plants)`).
    pub answer: String,
}

/// The worked examples of a template, in order.
pub fn in_context_examples(aspect: AspectKind) -> Vec<InContextExample> {
    let tag = answer_tag(aspect);
    let mut out = Vec::new();
    let mut pending: Option<String> = None;
    for line in template(aspect).lines() {
        if let Some(desc) = line.strip_prefix("[DESP]: ") {
            pending = Some(desc.to_string());
        } else if line.starts_with(tag) {
            if let Some(description) = pending.take() {
                out.push(InContextExample {
                    description,
                    answer: line.to_string(),
                });
            }
        }
    }
    out
}

/// The eight instructions used to collect descriptions, indexed by
/// `instruction_id`.
pub fn instructions() -> Vec<&'static str> {
    INSTRUCTIONS.lines().filter(|l| !l.is_empty()).collect()
}

pub fn instruction(id: u8) -> Option<&'static str> {
    instructions().get(usize::from(id)).copied()
}
