//! Domain types shared by every stage of the pipeline.
//!
//! Bounding boxes use a bottom-left origin with `y` growing upward. Sources
//! that report top-left-origin boxes go through [`BBox::from_y_down`] once,
//! at ingestion.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::TypeError;

/// Number of entries in the description-instruction table.
pub const INSTRUCTION_COUNT: u8 = 8;

/// An image, known only by id and pixel dimensions.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ImageRef {
    pub image_id: String,
    pub width: u32,
    pub height: u32,
}

impl ImageRef {
    pub fn new(image_id: impl Into<String>, width: u32, height: u32) -> Result<Self, TypeError> {
        let img = Self {
            image_id: image_id.into(),
            width,
            height,
        };
        img.validate()?;
        Ok(img)
    }

    pub fn validate(&self) -> Result<(), TypeError> {
        if self.image_id.is_empty() {
            return Err(TypeError::Invalid("image_id must be nonempty".into()));
        }
        if self.width == 0 || self.height == 0 {
            return Err(TypeError::Invalid(format!(
                "image {} has zero dimension {}x{}",
                self.image_id, self.width, self.height
            )));
        }
        Ok(())
    }

    pub fn w(&self) -> f64 {
        f64::from(self.width)
    }

    pub fn h(&self) -> f64 {
        f64::from(self.height)
    }
}

/// Axis-aligned box `(x1, y1, x2, y2)`: bottom-left corner then top-right
/// corner, in pixels, y-up.
///
/// Serialized as a four-element array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl From<[f64; 4]> for BBox {
    fn from([x1, y1, x2, y2]: [f64; 4]) -> Self {
        Self { x1, y1, x2, y2 }
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        [b.x1, b.y1, b.x2, b.y2]
    }
}

impl BBox {
    pub const fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Self {
        Self { x1, y1, x2, y2 }
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    /// Converts a top-left-origin box to the internal y-up convention:
    /// `y' = height - y` on both corners, then swap so that `y1 < y2`.
    /// Applying it twice is the identity.
    pub fn from_y_down(b: BBox, image_height: f64) -> BBox {
        let ya = image_height - b.y1;
        let yb = image_height - b.y2;
        BBox {
            x1: b.x1,
            y1: ya.min(yb),
            x2: b.x2,
            y2: ya.max(yb),
        }
    }
}

impl fmt::Display for BBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, {})", self.x1, self.y1, self.x2, self.y2)
    }
}

/// True iff `b` is a well-formed box inside `img`.
pub fn validate_bbox(b: &BBox, img: &ImageRef) -> bool {
    let coords = [b.x1, b.y1, b.x2, b.y2];
    if coords.iter().any(|c| !c.is_finite()) {
        return false;
    }
    b.x1 < b.x2
        && b.y1 < b.y2
        && b.x1 >= 0.0
        && b.y1 >= 0.0
        && b.x2 <= img.w()
        && b.y2 <= img.h()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub bbox: BBox,
    pub confidence: f64,
}

impl Detection {
    pub fn new(bbox: BBox, confidence: f64) -> Result<Self, TypeError> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(TypeError::Invalid(format!(
                "confidence {confidence} outside [0, 1]"
            )));
        }
        Ok(Self { bbox, confidence })
    }
}

/// One model response to an image-description instruction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub response_id: String,
    pub image: ImageRef,
    pub instruction_id: u8,
    pub text: String,
}

impl Response {
    pub fn validate(&self) -> Result<(), TypeError> {
        self.image.validate()?;
        if self.text.trim().is_empty() {
            return Err(TypeError::Invalid(format!(
                "response {} has empty text",
                self.response_id
            )));
        }
        if self.instruction_id >= INSTRUCTION_COUNT {
            return Err(TypeError::Invalid(format!(
                "response {} has instruction_id {} outside 0..{}",
                self.response_id, self.instruction_id, INSTRUCTION_COUNT
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AspectKind {
    Existence,
    Relation,
    Attribute,
    Count,
    ImageText,
}

impl AspectKind {
    /// Fixed processing order.
    pub const ALL: [AspectKind; 5] = [
        AspectKind::Existence,
        AspectKind::Relation,
        AspectKind::Attribute,
        AspectKind::Count,
        AspectKind::ImageText,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AspectKind::Existence => "existence",
            AspectKind::Relation => "relation",
            AspectKind::Attribute => "attribute",
            AspectKind::Count => "count",
            AspectKind::ImageText => "image_text",
        }
    }
}

impl fmt::Display for AspectKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Canonical form for entity, relation and attribute strings: lowercase,
/// trimmed, single-spaced, leading articles removed. Idempotent.
pub fn normalize(s: &str) -> String {
    let lowered = s.to_lowercase();
    let mut words: Vec<&str> = lowered.split_whitespace().collect();
    let mut start = 0;
    while start + 1 < words.len() && matches!(words[start], "a" | "an" | "the") {
        start += 1;
    }
    words.drain(..start);
    words.join(" ")
}

/// Scene text keeps its case; only surrounding and repeated whitespace go.
pub fn normalize_scene_text(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Extracted payload of a check-worthy part. The variant determines the
/// aspect.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "aspect", rename_all = "snake_case")]
pub enum CheckWorthyPart {
    Existence {
        entity: String,
    },
    Relation {
        subject: String,
        relation: String,
        object: String,
    },
    Attribute {
        attribute: String,
        object: String,
    },
    Count {
        number: u32,
        object: String,
    },
    ImageText {
        text: String,
    },
}

impl CheckWorthyPart {
    pub fn existence(entity: &str) -> Result<Self, TypeError> {
        Ok(Self::Existence {
            entity: nonempty(normalize(entity), "entity")?,
        })
    }

    pub fn relation(subject: &str, relation: &str, object: &str) -> Result<Self, TypeError> {
        Ok(Self::Relation {
            subject: nonempty(normalize(subject), "subject")?,
            relation: nonempty(normalize(relation), "relation")?,
            object: nonempty(normalize(object), "object")?,
        })
    }

    pub fn attribute(attribute: &str, object: &str) -> Result<Self, TypeError> {
        Ok(Self::Attribute {
            attribute: nonempty(normalize(attribute), "attribute")?,
            object: nonempty(normalize(object), "object")?,
        })
    }

    pub fn count(number: u32, object: &str) -> Result<Self, TypeError> {
        if number == 0 {
            return Err(TypeError::Invalid("count must be at least 1".into()));
        }
        Ok(Self::Count {
            number,
            object: nonempty(normalize(object), "object")?,
        })
    }

    pub fn image_text(text: &str) -> Result<Self, TypeError> {
        Ok(Self::ImageText {
            text: nonempty(normalize_scene_text(text), "text")?,
        })
    }

    pub fn aspect(&self) -> AspectKind {
        match self {
            Self::Existence { .. } => AspectKind::Existence,
            Self::Relation { .. } => AspectKind::Relation,
            Self::Attribute { .. } => AspectKind::Attribute,
            Self::Count { .. } => AspectKind::Count,
            Self::ImageText { .. } => AspectKind::ImageText,
        }
    }

    /// Re-applies normalization, rejecting parts that end up empty. Used
    /// when parts arrive from files rather than the constructors.
    pub fn normalized(&self) -> Result<Self, TypeError> {
        match self {
            Self::Existence { entity } => Self::existence(entity),
            Self::Relation {
                subject,
                relation,
                object,
            } => Self::relation(subject, relation, object),
            Self::Attribute { attribute, object } => Self::attribute(attribute, object),
            Self::Count { number, object } => Self::count(*number, object),
            Self::ImageText { text } => Self::image_text(text),
        }
    }
}

impl fmt::Display for CheckWorthyPart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Existence { entity } => write!(f, "{entity}"),
            Self::Relation {
                subject,
                relation,
                object,
            } => write!(f, "({subject}, {relation}, {object})"),
            Self::Attribute { attribute, object } => write!(f, "({attribute}, {object})"),
            Self::Count { number, object } => write!(f, "({number}, {object})"),
            Self::ImageText { text } => write!(f, "\"{text}\""),
        }
    }
}

fn nonempty(s: String, field: &str) -> Result<String, TypeError> {
    if s.is_empty() {
        Err(TypeError::Invalid(format!("{field} is empty after normalization")))
    } else {
        Ok(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpatialCategory {
    Left,
    Right,
    Top,
    Bottom,
    Near,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeCategory {
    Large,
    Small,
    Long,
    Short,
    Tall,
}

/// Leaf verification operations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AtomicTaskKind {
    Det,
    RelaGeneral,
    RelaSpatial(SpatialCategory),
    AttrGeneral,
    AttrSize(SizeCategory),
    Count,
    Ocr,
}

impl fmt::Display for AtomicTaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Det => f.write_str("DET"),
            Self::RelaGeneral => f.write_str("RELA_general"),
            Self::RelaSpatial(c) => write!(f, "RELA_spatial({c:?})"),
            Self::AttrGeneral => f.write_str("ATTR_general"),
            Self::AttrSize(c) => write!(f, "ATTR_size({c:?})"),
            Self::Count => f.write_str("COUNT"),
            Self::Ocr => f.write_str("OCR"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Skipped,
}

impl Verdict {
    /// `Some(0.0)` for Pass, `Some(-1.0)` for Fail, `None` for Skipped.
    /// The only place a numeric score comes from.
    pub fn score(self) -> Option<f64> {
        match self {
            Verdict::Pass => Some(0.0),
            Verdict::Fail => Some(-1.0),
            Verdict::Skipped => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskOutcome {
    Success,
    Failure,
    Skipped,
}

impl From<bool> for TaskOutcome {
    fn from(b: bool) -> Self {
        if b {
            TaskOutcome::Success
        } else {
            TaskOutcome::Failure
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub node: usize,
    pub task: AtomicTaskKind,
    pub input: String,
    pub outcome: TaskOutcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartAssessment {
    pub part: CheckWorthyPart,
    pub verdict: Verdict,
    pub trace: Vec<TraceEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl PartAssessment {
    pub fn aspect(&self) -> AspectKind {
        self.part.aspect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseAssessment {
    pub response_id: String,
    pub parts: Vec<PartAssessment>,
    pub overall: f64,
    /// No parts were extracted at all.
    #[serde(default)]
    pub no_checkworthy_content: bool,
    /// Every part was skipped (or there were none), so `overall` is 0 by
    /// convention rather than by evidence.
    #[serde(default)]
    pub no_scorable_parts: bool,
}

impl ResponseAssessment {
    pub fn verdicts(&self) -> Vec<Verdict> {
        self.parts.iter().map(|p| p.verdict).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferencePair {
    pub image: ImageRef,
    pub instruction_id_pref: u8,
    pub instruction_id_rej: u8,
    pub pref_text: String,
    pub rej_text: String,
    pub score_pref: f64,
    pub score_rej: f64,
}

impl PreferencePair {
    pub fn margin(&self) -> f64 {
        self.score_pref - self.score_rej
    }
}
