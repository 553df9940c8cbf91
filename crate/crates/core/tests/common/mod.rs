#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use serde::Deserialize;
use visverify_core::experts::ReplayGenerator;
use visverify_core::{AnnotationStore, AspectKind, CheckWorthyPart, Response, Verdict};

pub fn scene_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/scene")
}

pub fn scene_store() -> Arc<AnnotationStore> {
    Arc::new(AnnotationStore::load_dir(&scene_dir().join("annotations")).expect("scene annotations"))
}

pub fn scene_responses_text() -> String {
    std::fs::read_to_string(scene_dir().join("responses.jsonl")).expect("responses.jsonl")
}

pub fn scene_responses() -> Vec<Response> {
    scene_responses_text()
        .lines()
        .map(|l| serde_json::from_str(l).expect("response line"))
        .collect()
}

pub fn scene_generator() -> ReplayGenerator {
    ReplayGenerator::from_file(&scene_dir().join("transcript.json")).expect("transcript")
}

#[derive(Debug, Deserialize)]
pub struct ExpectedResponse {
    pub parts: Vec<(CheckWorthyPart, Verdict)>,
    pub overall_uniform: (i64, i64),
    pub overall_qwen: (i64, i64),
}

#[derive(Debug, Deserialize)]
pub struct ExpectedPairs {
    pub total_unordered: usize,
    pub ties: Vec<(String, String)>,
    pub kept: usize,
}

#[derive(Debug, Deserialize)]
pub struct ExpectedScene {
    pub responses: BTreeMap<String, ExpectedResponse>,
    pub pairs: ExpectedPairs,
}

pub fn expected_scene() -> ExpectedScene {
    let text = std::fs::read_to_string(scene_dir().join("expected.json")).expect("expected.json");
    serde_json::from_str(&text).expect("expected table")
}

fn e(names: &[&str]) -> Vec<CheckWorthyPart> {
    names.iter().map(|n| CheckWorthyPart::existence(n).unwrap()).collect()
}

fn r(triples: &[(&str, &str, &str)]) -> Vec<CheckWorthyPart> {
    triples
        .iter()
        .map(|(s, r, o)| CheckWorthyPart::relation(s, r, o).unwrap())
        .collect()
}

fn a(pairs: &[(&str, &str)]) -> Vec<CheckWorthyPart> {
    pairs
        .iter()
        .map(|(a, o)| CheckWorthyPart::attribute(a, o).unwrap())
        .collect()
}

fn c(pairs: &[(u32, &str)]) -> Vec<CheckWorthyPart> {
    pairs
        .iter()
        .map(|(n, o)| CheckWorthyPart::count(*n, o).unwrap())
        .collect()
}

fn t(texts: &[&str]) -> Vec<CheckWorthyPart> {
    texts.iter().map(|s| CheckWorthyPart::image_text(s).unwrap()).collect()
}

/// Parts printed in each worked example of the five extraction templates,
/// in template order. Written out by hand from the printed answers.
pub fn in_context_expected() -> Vec<(AspectKind, Vec<Vec<CheckWorthyPart>>)> {
    vec![
        (
            AspectKind::Existence,
            vec![
                e(&[
                    "woman", "kitchen", "food", "oven", "microwave", "sink", "bowl", "cup", "bottle", "bowl",
                    "spoon", "chair", "shirt", "jeans",
                ]),
                e(&["batter", "baseball bat", "ball", "player", "pitcher", "baseball glove"]),
                e(&["pan", "pizza", "olives", "mushroom", "cheese"]),
                e(&["sandwich", "container", "sauce", "carrot"]),
                e(&[
                    "city street", "suv", "sidewalk", "people", "man", "tree", "traffic sign", "vehicle",
                    "pedestrian",
                ]),
                e(&["man", "clock tower", "roman numeral", "clock"]),
                e(&["lake", "island", "water", "airplane", "wing's angle", "sky", "sun light"]),
                e(&["person", "horse", "water", "river", "rider", "helmet"]),
            ],
        ),
        (
            AspectKind::Relation,
            vec![
                r(&[("orange", "on", "counter"), ("bottle", "near the edge of", "counter")]),
                r(&[
                    ("train", "on", "train tracks"),
                    ("truck", "on left side of", "frame"),
                    ("truck", "on right side of", "frame"),
                    ("traffic light", "close to", "truck"),
                    ("traffic light", "near the left edge of", "frame"),
                    ("person", "center-left of", "image"),
                ]),
                r(&[
                    ("horse", "on", "road"),
                    ("horse", "left side of", "image"),
                    ("horse", "center of", "image"),
                    ("horse", "right of", "image"),
                    ("people", "riding", "horse"),
                    ("people", "wearing", "hat"),
                ]),
                r(&[("man", "holding", "ski poles")]),
                r(&[
                    ("food", "on", "dining table"),
                    ("sandwiches", "left of", "plate"),
                    ("sandwiches", "in the middle of", "plate"),
                    ("sandwiches", "right of", "plate"),
                    ("bottle", "on", "table"),
                    ("bottle", "left corner of", "table"),
                ]),
                r(&[("cat", "on", "floor")]),
                r(&[("person", "back of", "airplane"), ("truck", "right of", "image")]),
                r(&[
                    ("train", "on", "train tracks"),
                    ("truck", "on left side of", "frame"),
                    ("truck", "on right side of", "frame"),
                    ("traffic light", "close to", "truck"),
                    ("traffic light", "near the left edge of", "frame"),
                    ("person", "center-left of", "image"),
                ]),
            ],
        ),
        (
            AspectKind::Attribute,
            vec![
                a(&[("shirtless", "man"), ("standing", "man"), ("tight", "wetsuit")]),
                a(&[("white", "plate")]),
                a(&[
                    ("blue", "lawn chair"),
                    ("plastic", "lawn chair"),
                    ("large", "umbrella"),
                    ("small", "tree"),
                ]),
                a(&[("wooden", "boat"), ("sitting", "dog"), ("moored", "boat")]),
                vec![],
                a(&[("large", "bus"), ("white", "bus"), ("tall", "building"), ("yellow", "taxi cab")]),
                a(&[("pink and black", "wetsuit")]),
                a(&[("large", "elephant"), ("gray", "elephant"), ("walking", "elephant"), ("rock", "wall")]),
            ],
        ),
        (
            AspectKind::Count,
            vec![
                c(&[(5, "potted plants")]),
                c(&[(3, "clocks")]),
                c(&[(2, "beds"), (4, "pillow"), (2, "people")]),
                c(&[(2, "fire hydrant")]),
                vec![],
                c(&[(3, "bottle")]),
                vec![],
                c(&[(2, "police officer"), (2, "car")]),
            ],
        ),
        (
            AspectKind::ImageText,
            vec![
                vec![],
                t(&["Luxury Fashion"]),
                vec![],
                vec![],
                t(&[
                    "Broadway",
                    "W 42nd St",
                    "Phantom of the Opera",
                    "NYC Tours",
                    "Tickets $25",
                    "Visit Central Park.",
                ]),
                t(&["Private Beach - No Trespassing."]),
                vec![],
                t(&["Baker Street"]),
            ],
        ),
    ]
}
