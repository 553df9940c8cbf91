//! Second decomposition step: compile each part into its DAG of atomic
//! verification tasks.
//!
//! | aspect     | nodes                                          |
//! |------------|------------------------------------------------|
//! | existence  | `DET(obj)`                                     |
//! | relation   | `DET(s)`, `DET(o)`, `RELA(s, rel, o)` <- both  |
//! | attribute  | `DET(obj)`, `ATTR(attr, obj)` <- DET           |
//! | count      | `DET(obj)`, `COUNT(n, obj)` <- DET             |
//! | image text | `OCR(text)`                                    |
//!
//! Relations and attributes route to the spatial and size rule engines by
//! keyword. Keyword containment is matched on whole words.

use serde::{Deserialize, Serialize};

use crate::types::{AtomicTaskKind, CheckWorthyPart, SizeCategory, SpatialCategory};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskNode {
    pub id: usize,
    pub kind: AtomicTaskKind,
    pub inputs: Vec<String>,
    pub prerequisites: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskLayout {
    pub part: CheckWorthyPart,
    pub nodes: Vec<TaskNode>,
    /// Routing notes, e.g. a phrase that matched several spatial categories.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelationRoute {
    General,
    Spatial(SpatialCategory),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttributeRoute {
    General,
    Size(SizeCategory),
}

fn words(s: &str) -> Vec<&str> {
    s.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .collect()
}

fn spatial_matches(rela: &str) -> Vec<SpatialCategory> {
    let w = words(rela);
    let has = |k: &str| w.contains(&k);
    let mut out = Vec::new();
    if has("left") {
        out.push(SpatialCategory::Left);
    }
    if has("right") {
        out.push(SpatialCategory::Right);
    }
    if rela == "above" || has("top") {
        out.push(SpatialCategory::Top);
    }
    if matches!(rela, "below" | "under" | "beneath" | "underneath") || has("bottom") {
        out.push(SpatialCategory::Bottom);
    }
    if matches!(rela, "next" | "next to") || has("near") {
        out.push(SpatialCategory::Near);
    }
    out
}

fn size_matches(attr: &str) -> Vec<SizeCategory> {
    let w = words(attr);
    let has = |k: &str| w.contains(&k);
    let mut out = Vec::new();
    if matches!(attr, "huge" | "big") || has("large") {
        out.push(SizeCategory::Large);
    }
    if attr == "tiny" || has("small") {
        out.push(SizeCategory::Small);
    }
    if attr == "long" {
        out.push(SizeCategory::Long);
    }
    if matches!(attr, "tall" | "high") {
        out.push(SizeCategory::Tall);
    }
    if attr == "short" {
        out.push(SizeCategory::Short);
    }
    out
}

/// Spatial category of a normalized relation phrase, tested in the order
/// Left, Right, Top, Bottom, Near.
pub fn classify_relation(rela: &str) -> RelationRoute {
    classify_relation_noted(rela).0
}

/// As [`classify_relation`], plus notes about ambiguous routing.
pub fn classify_relation_noted(rela: &str) -> (RelationRoute, Vec<String>) {
    let hits = spatial_matches(rela);
    let mut notes = Vec::new();
    if hits.len() > 1 {
        notes.push(format!(
            "relation {rela:?} matches {hits:?}; routed to {:?}",
            hits[0]
        ));
    }
    if matches!(rela, "next") {
        notes.push("bare \"next\" routed to Near".to_string());
    }
    let route = hits
        .first()
        .map_or(RelationRoute::General, |&c| RelationRoute::Spatial(c));
    (route, notes)
}

/// Size category of a normalized attribute, tested in the order Large,
/// Small, Long, Tall, Short.
pub fn classify_attribute(attr: &str) -> AttributeRoute {
    classify_attribute_noted(attr).0
}

pub fn classify_attribute_noted(attr: &str) -> (AttributeRoute, Vec<String>) {
    let hits = size_matches(attr);
    let mut notes = Vec::new();
    if hits.len() > 1 {
        notes.push(format!(
            "attribute {attr:?} matches {hits:?}; routed to {:?}",
            hits[0]
        ));
    }
    let route = hits
        .first()
        .map_or(AttributeRoute::General, |&c| AttributeRoute::Size(c));
    (route, notes)
}

fn det(id: usize, entity: &str) -> TaskNode {
    TaskNode {
        id,
        kind: AtomicTaskKind::Det,
        inputs: vec![entity.to_string()],
        prerequisites: Vec::new(),
    }
}

pub fn build_layout(part: &CheckWorthyPart) -> TaskLayout {
    let mut warnings = Vec::new();
    let nodes = match part {
        CheckWorthyPart::Existence { entity } => vec![det(0, entity)],
        CheckWorthyPart::Relation {
            subject,
            relation,
            object,
        } => {
            let (route, notes) = classify_relation_noted(relation);
            warnings.extend(notes);
            let kind = match route {
                RelationRoute::General => AtomicTaskKind::RelaGeneral,
                RelationRoute::Spatial(c) => AtomicTaskKind::RelaSpatial(c),
            };
            vec![
                det(0, subject),
                det(1, object),
                TaskNode {
                    id: 2,
                    kind,
                    inputs: vec![subject.clone(), relation.clone(), object.clone()],
                    prerequisites: vec![0, 1],
                },
            ]
        }
        CheckWorthyPart::Attribute { attribute, object } => {
            let (route, notes) = classify_attribute_noted(attribute);
            warnings.extend(notes);
            let kind = match route {
                AttributeRoute::General => AtomicTaskKind::AttrGeneral,
                AttributeRoute::Size(c) => AtomicTaskKind::AttrSize(c),
            };
            vec![
                det(0, object),
                TaskNode {
                    id: 1,
                    kind,
                    inputs: vec![attribute.clone(), object.clone()],
                    prerequisites: vec![0],
                },
            ]
        }
        CheckWorthyPart::Count { number, object } => vec![
            det(0, object),
            TaskNode {
                id: 1,
                kind: AtomicTaskKind::Count,
                inputs: vec![number.to_string(), object.clone()],
                prerequisites: vec![0],
            },
        ],
        CheckWorthyPart::ImageText { text } => vec![TaskNode {
            id: 0,
            kind: AtomicTaskKind::Ocr,
            inputs: vec![text.clone()],
            prerequisites: Vec::new(),
        }],
    };
    TaskLayout {
        part: part.clone(),
        nodes,
        warnings,
    }
}

impl TaskLayout {
    /// Node ids in an order where every prerequisite precedes its
    /// dependents. Layouts are built in such an order already; this checks
    /// it and reports cycles or dangling edges as `None`.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let n = self.nodes.len();
        let mut indegree = vec![0usize; n];
        for node in &self.nodes {
            for &p in &node.prerequisites {
                if p >= n {
                    return None;
                }
                indegree[node.id] += 1;
            }
        }
        let mut order = Vec::with_capacity(n);
        let mut ready: Vec<usize> = (0..n).filter(|&i| indegree[i] == 0).rev().collect();
        while let Some(i) = ready.pop() {
            order.push(i);
            for node in &self.nodes {
                if node.prerequisites.contains(&i) {
                    indegree[node.id] -= 1;
                    if indegree[node.id] == 0 {
                        ready.push(node.id);
                    }
                }
            }
        }
        (order.len() == n).then_some(order)
    }
}
