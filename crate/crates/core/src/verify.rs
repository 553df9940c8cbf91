//! Execution of task layouts against the experts.
//!
//! Skip semantics: a relation, attribute or count check whose prerequisite
//! detection came back empty is `Skipped` and carries no score. The missing
//! object is penalized only through its own existence part, if one was
//! extracted.

use crate::error::VerifyError;
use crate::experts::{self, ExpertConfig, Experts, StructuredHint, VqaQuestion};
use crate::layout::{build_layout, TaskLayout};
use crate::preference::{overall_score_detailed, AspectWeights};
use crate::types::{
    AtomicTaskKind, BBox, CheckWorthyPart, ImageRef, PartAssessment, Response, ResponseAssessment,
    SizeCategory, SpatialCategory, TaskOutcome, TraceEntry, Verdict,
};

/// Spatial relation test over every (subject box, object box) pair. Edge
/// comparisons use coordinate sums (twice the box centres); ties are false.
pub fn verify_spatial(
    boxes_s: &[BBox],
    boxes_o: &[BBox],
    cat: SpatialCategory,
    img: &ImageRef,
) -> Result<bool, VerifyError> {
    if boxes_s.is_empty() || boxes_o.is_empty() {
        return Err(VerifyError::EmptyDetections);
    }
    let (w, h) = (img.w(), img.h());
    let holds = |s: &BBox, o: &BBox| {
        let (sx, ox) = (s.x1 + s.x2, o.x1 + o.x2);
        let (sy, oy) = (s.y1 + s.y2, o.y1 + o.y2);
        match cat {
            SpatialCategory::Left => sx < ox,
            SpatialCategory::Right => sx > ox,
            SpatialCategory::Top => sy > oy,
            SpatialCategory::Bottom => sy < oy,
            // Evaluated left to right as written, so rounding matches the rule.
            SpatialCategory::Near => {
                (s.x1 + s.x2 - o.x1 - o.x2).abs() < w * 0.1 || (s.y1 + s.y2 - o.y1 - o.y2).abs() < h * 0.1
            }
        }
    };
    Ok(boxes_s
        .iter()
        .any(|s| boxes_o.iter().any(|o| holds(s, o))))
}

/// Size attribute test; true if any box qualifies. Ratios are box extent
/// over image extent.
pub fn verify_size(boxes: &[BBox], cat: SizeCategory, img: &ImageRef) -> Result<bool, VerifyError> {
    if boxes.is_empty() {
        return Err(VerifyError::EmptyDetections);
    }
    let (w, h) = (img.w(), img.h());
    Ok(boxes.iter().any(|b| {
        let rw = b.width() / w;
        let rh = b.height() / h;
        match cat {
            SizeCategory::Large => rh > 0.4 || rw > 0.4,
            SizeCategory::Small => rw < 0.3 && rh < 0.3,
            SizeCategory::Long => rh > 0.5 || rw > 0.5,
            SizeCategory::Short => rw < 0.3 && rh < 0.3,
            SizeCategory::Tall => rh > 0.4,
        }
    }))
}

pub fn make_relation_question(subject: &str, relation: &str, object: &str) -> String {
    format!("Is the {subject} {relation} {object}?")
}

pub fn make_attribute_question(attribute: &str, object: &str) -> String {
    format!("Is the {object} {attribute}?")
}

pub fn verify_count(boxes: &[BBox], n: u32) -> Result<bool, VerifyError> {
    if boxes.is_empty() {
        return Err(VerifyError::EmptyDetections);
    }
    Ok(boxes.len() == n as usize)
}

/// Exact match of the claimed text against any detected text, after
/// trimming surrounding whitespace.
pub fn verify_ocr(claimed: &str, detected: &[String], case_insensitive: bool) -> bool {
    let claimed = claimed.trim();
    detected.iter().any(|d| {
        let d = d.trim();
        if case_insensitive {
            d.to_lowercase() == claimed.to_lowercase()
        } else {
            d == claimed
        }
    })
}

struct Run<'a> {
    image: &'a ImageRef,
    experts: &'a Experts,
    config: &'a ExpertConfig,
    trace: Vec<TraceEntry>,
}

impl Run<'_> {
    fn record(&mut self, node: usize, task: AtomicTaskKind, input: String, outcome: TaskOutcome, note: Option<String>) {
        self.trace.push(TraceEntry {
            node,
            task,
            input,
            outcome,
            note,
        });
    }

    fn det(&mut self, node: usize, entity: &str) -> Result<Vec<BBox>, VerifyError> {
        let boxes = experts::detect(
            self.experts.detector.as_ref(),
            entity,
            self.image,
            self.config.detection_threshold,
        )?;
        let note = Some(format!("{} box(es)", boxes.len()));
        self.record(
            node,
            AtomicTaskKind::Det,
            entity.to_string(),
            (!boxes.is_empty()).into(),
            note,
        );
        Ok(boxes)
    }

    fn skip(&mut self, node: usize, task: AtomicTaskKind, input: String, why: &str) -> Verdict {
        self.record(node, task, input, TaskOutcome::Skipped, Some(why.to_string()));
        Verdict::Skipped
    }

    fn decided(&mut self, node: usize, task: AtomicTaskKind, input: String, ok: bool, note: Option<String>) -> Verdict {
        self.record(node, task, input, ok.into(), note);
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    /// Fluency gate followed by binary VQA.
    fn general_question(
        &mut self,
        node: usize,
        task: AtomicTaskKind,
        question: String,
        hint: StructuredHint,
    ) -> Result<Verdict, VerifyError> {
        let score = experts::fluency(self.experts.fluency.as_ref(), &question)?;
        if !experts::passes_threshold(score, self.config.fluency_threshold) {
            let why = format!(
                "question fluency {score} below {}",
                self.config.fluency_threshold
            );
            return Ok(self.skip(node, task, question, &why));
        }
        let q = VqaQuestion {
            text: question,
            structured: Some(hint),
        };
        let yes = experts::ask_yes_no(self.experts.vqa.as_ref(), &q, self.image)?;
        let note = Some(if yes { "answer: yes" } else { "answer: no" }.to_string());
        Ok(self.decided(node, task, q.text, yes, note))
    }
}

fn node_kind(layout: &TaskLayout, id: usize) -> Result<AtomicTaskKind, VerifyError> {
    layout
        .nodes
        .get(id)
        .map(|n| n.kind)
        .ok_or_else(|| VerifyError::LayoutMismatch(format!("missing node {id}")))
}

/// Runs one part's layout. Expert failures abort the part.
pub fn assess_part(
    part: &CheckWorthyPart,
    layout: &TaskLayout,
    image: &ImageRef,
    experts: &Experts,
    config: &ExpertConfig,
) -> Result<PartAssessment, VerifyError> {
    if &layout.part != part {
        return Err(VerifyError::LayoutMismatch(format!(
            "layout was built for {} but assessing {part}",
            layout.part
        )));
    }
    let mut run = Run {
        image,
        experts,
        config,
        trace: Vec::with_capacity(layout.nodes.len()),
    };
    let verdict = match part {
        CheckWorthyPart::Existence { entity } => {
            let boxes = run.det(0, entity)?;
            if boxes.is_empty() {
                Verdict::Fail
            } else {
                Verdict::Pass
            }
        }
        CheckWorthyPart::Relation {
            subject,
            relation,
            object,
        } => {
            let kind = node_kind(layout, 2)?;
            let input = format!("({subject}, {relation}, {object})");
            let bs = run.det(0, subject)?;
            let bo = run.det(1, object)?;
            if bs.is_empty() || bo.is_empty() {
                run.skip(2, kind, input, "prerequisite detection empty")
            } else {
                match kind {
                    AtomicTaskKind::RelaSpatial(cat) => {
                        let ok = verify_spatial(&bs, &bo, cat, image)?;
                        run.decided(2, kind, input, ok, None)
                    }
                    AtomicTaskKind::RelaGeneral => run.general_question(
                        2,
                        kind,
                        make_relation_question(subject, relation, object),
                        StructuredHint::Relation {
                            subject: subject.clone(),
                            relation: relation.clone(),
                            object: object.clone(),
                        },
                    )?,
                    other => {
                        return Err(VerifyError::LayoutMismatch(format!(
                            "relation node has kind {other}"
                        )))
                    }
                }
            }
        }
        CheckWorthyPart::Attribute { attribute, object } => {
            let kind = node_kind(layout, 1)?;
            let input = format!("({attribute}, {object})");
            let boxes = run.det(0, object)?;
            if boxes.is_empty() {
                run.skip(1, kind, input, "prerequisite detection empty")
            } else {
                match kind {
                    AtomicTaskKind::AttrSize(cat) => {
                        let ok = verify_size(&boxes, cat, image)?;
                        run.decided(1, kind, input, ok, None)
                    }
                    AtomicTaskKind::AttrGeneral => run.general_question(
                        1,
                        kind,
                        make_attribute_question(attribute, object),
                        StructuredHint::Attribute {
                            attribute: attribute.clone(),
                            object: object.clone(),
                        },
                    )?,
                    other => {
                        return Err(VerifyError::LayoutMismatch(format!(
                            "attribute node has kind {other}"
                        )))
                    }
                }
            }
        }
        CheckWorthyPart::Count { number, object } => {
            let input = format!("({number}, {object})");
            let boxes = run.det(0, object)?;
            if boxes.is_empty() {
                run.skip(1, AtomicTaskKind::Count, input, "prerequisite detection empty")
            } else {
                let ok = verify_count(&boxes, *number)?;
                let note = Some(format!("{} detected", boxes.len()));
                run.decided(1, AtomicTaskKind::Count, input, ok, note)
            }
        }
        CheckWorthyPart::ImageText { text } => {
            let detected = experts::read_texts(experts.ocr.as_ref(), image)?;
            let ok = verify_ocr(text, &detected, config.ocr_case_insensitive);
            let note = Some(format!("{} text(s) read", detected.len()));
            run.decided(0, AtomicTaskKind::Ocr, text.clone(), ok, note)
        }
    };
    Ok(PartAssessment {
        part: part.clone(),
        verdict,
        trace: run.trace,
        warnings: layout.warnings.clone(),
    })
}

/// Assesses every part of one response, in order, and scores the result.
pub fn assess_response(
    response: &Response,
    parts: &[CheckWorthyPart],
    experts: &Experts,
    config: &ExpertConfig,
    weights: &AspectWeights,
) -> Result<ResponseAssessment, VerifyError> {
    let assessed = parts
        .iter()
        .map(|p| assess_part(p, &build_layout(p), &response.image, experts, config))
        .collect::<Result<Vec<_>, _>>()?;
    let effective = weights.with_existence_multiplier(config.existence_weight_multiplier);
    let (overall, scorable) = overall_score_detailed(&assessed, &effective);
    Ok(ResponseAssessment {
        response_id: response.response_id.clone(),
        no_checkworthy_content: assessed.is_empty(),
        no_scorable_parts: !scorable,
        parts: assessed,
        overall,
    })
}
