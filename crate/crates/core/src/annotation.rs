//! Ground-truth scene annotations backing the oracle experts and the CHAIR
//! metrics.
//!
//! File format (one JSON document per image, unknown keys ignored):
//!
//! ```json
//! {
//!   "image_id": "img1", "width": 640, "height": 480,
//!   "objects": {"dog": [[10, 20, 110, 140]]},
//!   "relations": [["dog", "on", "grass"]],
//!   "attributes": [["brown", "dog"]],
//!   "scene_texts": ["STOP"],
//!   "synonyms": {"puppy": "dog"}
//! }
//! ```
//!
//! Boxes are y-up pixels. Names are normalized on load and object names are
//! mapped through `synonyms`, so lookups only ever see canonical names.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::Deserialize;

use crate::error::AnnotationError;
use crate::types::{normalize, validate_bbox, BBox, ImageRef};

#[derive(Debug, Deserialize)]
struct AnnotationFile {
    image_id: String,
    width: u32,
    height: u32,
    #[serde(default)]
    objects: BTreeMap<String, Vec<[f64; 4]>>,
    #[serde(default)]
    relations: Vec<[String; 3]>,
    #[serde(default)]
    attributes: Vec<[String; 2]>,
    #[serde(default)]
    scene_texts: Vec<String>,
    #[serde(default)]
    synonyms: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneAnnotation {
    pub image: ImageRef,
    pub objects: BTreeMap<String, Vec<BBox>>,
    pub relations: BTreeSet<(String, String, String)>,
    pub attributes: BTreeSet<(String, String)>,
    pub scene_texts: Vec<String>,
    pub synonyms: BTreeMap<String, String>,
}

impl SceneAnnotation {
    pub fn from_json(text: &str) -> Result<Self, AnnotationError> {
        let raw: AnnotationFile =
            serde_json::from_str(text).map_err(|source| AnnotationError::Parse {
                path: "<inline>".into(),
                source,
            })?;
        Self::from_file(raw)
    }

    pub fn load(path: &Path) -> Result<Self, AnnotationError> {
        let text = std::fs::read_to_string(path).map_err(|source| AnnotationError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let raw: AnnotationFile =
            serde_json::from_str(&text).map_err(|source| AnnotationError::Parse {
                path: path.display().to_string(),
                source,
            })?;
        Self::from_file(raw)
    }

    fn from_file(raw: AnnotationFile) -> Result<Self, AnnotationError> {
        let invalid = |reason: String| AnnotationError::Invalid {
            image_id: raw.image_id.clone(),
            reason,
        };
        let image = ImageRef {
            image_id: raw.image_id.clone(),
            width: raw.width,
            height: raw.height,
        };
        image.validate().map_err(|e| invalid(e.to_string()))?;

        let mut synonyms = BTreeMap::new();
        for (from, to) in &raw.synonyms {
            let (from, to) = (normalize(from), normalize(to));
            if from.is_empty() || to.is_empty() {
                return Err(invalid("empty synonym entry".into()));
            }
            if from != to {
                synonyms.insert(from, to);
            }
        }
        // One application must reach a fixed point.
        for (from, to) in &synonyms {
            if let Some(next) = synonyms.get(to) {
                return Err(invalid(format!(
                    "synonym chain {from} -> {to} -> {next} is not idempotent"
                )));
            }
        }
        let canon = |name: &str| -> String {
            let n = normalize(name);
            synonyms.get(&n).cloned().unwrap_or(n)
        };

        let mut objects: BTreeMap<String, Vec<BBox>> = BTreeMap::new();
        for (name, boxes) in &raw.objects {
            let key = canon(name);
            if key.is_empty() {
                return Err(invalid("empty object name".into()));
            }
            for coords in boxes {
                let b = BBox::from(*coords);
                if !validate_bbox(&b, &image) {
                    return Err(invalid(format!("box {b} for {name} is invalid")));
                }
                objects.entry(key.clone()).or_default().push(b);
            }
        }
        let relations = raw
            .relations
            .iter()
            .map(|[s, r, o]| (canon(s), normalize(r), canon(o)))
            .collect();
        let attributes = raw
            .attributes
            .iter()
            .map(|[a, o]| (normalize(a), canon(o)))
            .collect();

        Ok(Self {
            image,
            objects,
            relations,
            attributes,
            scene_texts: raw.scene_texts,
            synonyms,
        })
    }

    /// Normalizes `name` and applies the synonym map once.
    pub fn canonical(&self, name: &str) -> String {
        let n = normalize(name);
        self.synonyms.get(&n).cloned().unwrap_or(n)
    }

    /// Candidate canonical names for a queried entity: the name itself, then
    /// singular forms obtained by dropping a trailing "es" or "s".
    pub fn candidates(&self, name: &str) -> Vec<String> {
        let n = normalize(name);
        let mut out = vec![self.canonical(&n)];
        for suffix in ["es", "s"] {
            if let Some(stem) = n.strip_suffix(suffix) {
                if !stem.is_empty() {
                    let c = self.canonical(stem);
                    if !out.contains(&c) {
                        out.push(c);
                    }
                }
            }
        }
        out
    }

    /// Ground-truth boxes for an entity, empty when absent.
    pub fn boxes_for(&self, entity: &str) -> &[BBox] {
        self.candidates(entity)
            .iter()
            .find_map(|c| self.objects.get(c))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn has_relation(&self, subject: &str, relation: &str, object: &str) -> bool {
        let rel = normalize(relation);
        let subjects = self.candidates(subject);
        let objects = self.candidates(object);
        subjects.iter().any(|s| {
            objects
                .iter()
                .any(|o| self.relations.contains(&(s.clone(), rel.clone(), o.clone())))
        })
    }

    pub fn has_attribute(&self, attribute: &str, object: &str) -> bool {
        let attr = normalize(attribute);
        self.candidates(object)
            .into_iter()
            .any(|o| self.attributes.contains(&(attr.clone(), o)))
    }

    /// Canonical names of every annotated object.
    pub fn object_names(&self) -> BTreeSet<String> {
        self.objects.keys().cloned().collect()
    }
}

/// All annotations keyed by image id; read-only after loading.
#[derive(Debug, Clone, Default)]
pub struct AnnotationStore {
    by_image: HashMap<String, SceneAnnotation>,
}

impl AnnotationStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, ann: SceneAnnotation) -> Result<(), AnnotationError> {
        let id = ann.image.image_id.clone();
        if self.by_image.contains_key(&id) {
            return Err(AnnotationError::Duplicate(id));
        }
        self.by_image.insert(id, ann);
        Ok(())
    }

    /// Loads every `*.json` file in `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self, AnnotationError> {
        let io_err = |source| AnnotationError::Io {
            path: dir.display().to_string(),
            source,
        };
        let mut paths: Vec<_> = std::fs::read_dir(dir)
            .map_err(io_err)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        let mut store = Self::new();
        for p in paths {
            store.insert(SceneAnnotation::load(&p)?)?;
        }
        Ok(store)
    }

    pub fn get(&self, image_id: &str) -> Option<&SceneAnnotation> {
        self.by_image.get(image_id)
    }

    pub fn len(&self) -> usize {
        self.by_image.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_image.is_empty()
    }
}

impl FromIterator<SceneAnnotation> for AnnotationStore {
    /// Later duplicates replace earlier ones.
    fn from_iter<I: IntoIterator<Item = SceneAnnotation>>(iter: I) -> Self {
        Self {
            by_image: iter
                .into_iter()
                .map(|a| (a.image.image_id.clone(), a))
                .collect(),
        }
    }
}
