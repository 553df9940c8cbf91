use std::sync::Arc;

use crate::annotation::{AnnotationStore, SceneAnnotation};
use crate::error::ExpertError;
use crate::types::{Detection, ImageRef};

use super::{BinaryVqa, Detector, OcrReader, StructuredHint, VqaQuestion};

fn lookup<'a>(store: &'a AnnotationStore, image: &ImageRef) -> Result<&'a SceneAnnotation, ExpertError> {
    store
        .get(&image.image_id)
        .ok_or_else(|| ExpertError::AnnotationMissing {
            image_id: image.image_id.clone(),
        })
}

/// Returns ground-truth boxes with confidence 1.0.
#[derive(Debug, Clone)]
pub struct OracleDetector {
    store: Arc<AnnotationStore>,
}

impl OracleDetector {
    pub fn new(store: Arc<AnnotationStore>) -> Self {
        Self { store }
    }
}

impl Detector for OracleDetector {
    fn detect_all(&self, entity: &str, image: &ImageRef) -> Result<Vec<Detection>, ExpertError> {
        let ann = lookup(&self.store, image)?;
        Ok(ann
            .boxes_for(entity)
            .iter()
            .map(|&bbox| Detection {
                bbox,
                confidence: 1.0,
            })
            .collect())
    }
}

/// Answers from the annotated relation and attribute sets. Requires the
/// structured hint; the question text is not interpreted.
#[derive(Debug, Clone)]
pub struct OracleVqa {
    store: Arc<AnnotationStore>,
}

impl OracleVqa {
    pub fn new(store: Arc<AnnotationStore>) -> Self {
        Self { store }
    }
}

impl BinaryVqa for OracleVqa {
    fn ask(&self, question: &VqaQuestion, image: &ImageRef) -> Result<bool, ExpertError> {
        let ann = lookup(&self.store, image)?;
        match &question.structured {
            Some(StructuredHint::Relation {
                subject,
                relation,
                object,
            }) => Ok(ann.has_relation(subject, relation, object)),
            Some(StructuredHint::Attribute { attribute, object }) => {
                Ok(ann.has_attribute(attribute, object))
            }
            None => Err(ExpertError::unavailable(
                "vqa",
                format!("oracle cannot answer free-form question {:?}", question.text),
            )),
        }
    }
}

#[derive(Debug, Clone)]
pub struct OracleOcr {
    store: Arc<AnnotationStore>,
}

impl OracleOcr {
    pub fn new(store: Arc<AnnotationStore>) -> Self {
        Self { store }
    }
}

impl OcrReader for OracleOcr {
    fn read_texts(&self, image: &ImageRef) -> Result<Vec<String>, ExpertError> {
        Ok(lookup(&self.store, image)?.scene_texts.clone())
    }
}
