//! Clients for the expert wire protocol (JSON over HTTP).
//!
//! | endpoint            | request                                    | response |
//! |---------------------|--------------------------------------------|----------|
//! | `POST /v1/detect`   | `{"image_id", "entity"}`                   | `{"image_width", "image_height", "detections": [{"bbox", "confidence"}]}` |
//! | `POST /v1/vqa`      | `{"image_id", "question", "structured"?}`  | `{"answer": "yes" \| "no"}` |
//! | `POST /v1/ocr`      | `{"image_id"}`                             | `{"texts": [..]}` |
//! | `POST /v1/fluency`  | `{"text"}`                                 | `{"score"}` |
//! | `POST /v1/generate` | `{"prompt"}`                               | `{"text"}` |
//!
//! Boxes on the wire are y-up pixels. A 404 carrying
//! `{"error": "unknown_image"}` means the server has no such image; any
//! other non-200 status is a backend failure.

use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::ExpertError;
use crate::types::{validate_bbox, BBox, Detection, ImageRef};

use super::{is_affirmative, BinaryVqa, Detector, FluencyScorer, OcrReader, StructuredHint, TextGenerator, VqaQuestion};

#[derive(Debug, Serialize)]
pub struct DetectRequest<'a> {
    pub image_id: &'a str,
    pub entity: &'a str,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WireDetection {
    pub bbox: [f64; 4],
    pub confidence: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectResponse {
    pub image_width: u32,
    pub image_height: u32,
    pub detections: Vec<WireDetection>,
}

#[derive(Debug, Serialize)]
pub struct VqaRequest<'a> {
    pub image_id: &'a str,
    pub question: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub structured: Option<&'a StructuredHint>,
}

#[derive(Debug, Deserialize)]
struct VqaResponse {
    answer: String,
}

#[derive(Debug, Serialize)]
struct OcrRequest<'a> {
    image_id: &'a str,
}

#[derive(Debug, Deserialize)]
struct OcrResponse {
    texts: Vec<String>,
}

#[derive(Debug, Serialize)]
struct FluencyRequest<'a> {
    text: &'a str,
}

#[derive(Debug, Deserialize)]
struct FluencyResponse {
    score: f64,
}

#[derive(Debug, Serialize)]
struct GenerateRequest<'a> {
    prompt: &'a str,
}

#[derive(Debug, Deserialize)]
struct GenerateResponse {
    text: String,
}

#[derive(Debug, Deserialize)]
struct ErrorBody {
    error: String,
}

/// Shared HTTP connection pool for one server.
#[derive(Debug, Clone)]
pub struct RemoteClient {
    agent: ureq::Agent,
    base_url: String,
}

impl RemoteClient {
    pub fn new(base_url: impl Into<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .build()
            .new_agent();
        Self {
            agent,
            base_url: base_url.into().trim_end_matches('/').to_string(),
        }
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    fn post<Req: Serialize, Resp: DeserializeOwned>(
        &self,
        role: &'static str,
        path: &str,
        body: &Req,
        image_id: Option<&str>,
    ) -> Result<Resp, ExpertError> {
        let url = format!("{}{}", self.base_url, path);
        let mut resp = self
            .agent
            .post(&url)
            .send_json(body)
            .map_err(|e| ExpertError::unavailable(role, format!("POST {url}: {e}")))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| ExpertError::unavailable(role, format!("reading body from {url}: {e}")))?;
        if status == 200 {
            return serde_json::from_str(&text)
                .map_err(|e| ExpertError::unavailable(role, format!("malformed reply from {url}: {e}")));
        }
        if status == 404 {
            if let (Some(id), Ok(err)) = (image_id, serde_json::from_str::<ErrorBody>(&text)) {
                if err.error == "unknown_image" {
                    return Err(ExpertError::AnnotationMissing {
                        image_id: id.to_string(),
                    });
                }
            }
        }
        Err(ExpertError::unavailable(
            role,
            format!("POST {url} returned {status}: {text}"),
        ))
    }
}

#[derive(Debug, Clone)]
pub struct RemoteDetector(pub RemoteClient);

impl Detector for RemoteDetector {
    fn detect_all(&self, entity: &str, image: &ImageRef) -> Result<Vec<Detection>, ExpertError> {
        let resp: DetectResponse = self.0.post(
            "detector",
            "/v1/detect",
            &DetectRequest {
                image_id: &image.image_id,
                entity,
            },
            Some(&image.image_id),
        )?;
        let frame = ImageRef {
            image_id: image.image_id.clone(),
            width: resp.image_width,
            height: resp.image_height,
        };
        frame
            .validate()
            .map_err(|e| ExpertError::unavailable("detector", e.to_string()))?;
        if (frame.width, frame.height) != (image.width, image.height) {
            return Err(ExpertError::unavailable(
                "detector",
                format!(
                    "server reports {}x{} for {}, expected {}x{}",
                    frame.width, frame.height, image.image_id, image.width, image.height
                ),
            ));
        }
        resp.detections
            .into_iter()
            .map(|d| {
                let bbox = BBox::from(d.bbox);
                if !validate_bbox(&bbox, &frame) {
                    return Err(ExpertError::unavailable(
                        "detector",
                        format!("box {bbox} invalid for {}x{}", frame.width, frame.height),
                    ));
                }
                Detection::new(bbox, d.confidence)
                    .map_err(|e| ExpertError::unavailable("detector", e.to_string()))
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct RemoteVqa(pub RemoteClient);

impl BinaryVqa for RemoteVqa {
    fn ask(&self, question: &VqaQuestion, image: &ImageRef) -> Result<bool, ExpertError> {
        let resp: VqaResponse = self.0.post(
            "vqa",
            "/v1/vqa",
            &VqaRequest {
                image_id: &image.image_id,
                question: &question.text,
                structured: question.structured.as_ref(),
            },
            Some(&image.image_id),
        )?;
        Ok(is_affirmative(&resp.answer))
    }
}

#[derive(Debug, Clone)]
pub struct RemoteOcr(pub RemoteClient);

impl OcrReader for RemoteOcr {
    fn read_texts(&self, image: &ImageRef) -> Result<Vec<String>, ExpertError> {
        let resp: OcrResponse = self.0.post(
            "ocr",
            "/v1/ocr",
            &OcrRequest {
                image_id: &image.image_id,
            },
            Some(&image.image_id),
        )?;
        Ok(resp.texts)
    }
}

#[derive(Debug, Clone)]
pub struct RemoteFluency(pub RemoteClient);

impl FluencyScorer for RemoteFluency {
    fn score(&self, text: &str) -> Result<f64, ExpertError> {
        let resp: FluencyResponse =
            self.0
                .post("fluency", "/v1/fluency", &FluencyRequest { text }, None)?;
        Ok(resp.score)
    }
}

#[derive(Debug, Clone)]
pub struct RemoteGenerator(pub RemoteClient);

impl TextGenerator for RemoteGenerator {
    fn generate(&self, prompt: &str) -> Result<String, ExpertError> {
        let resp: GenerateResponse =
            self.0
                .post("generator", "/v1/generate", &GenerateRequest { prompt }, None)?;
        Ok(resp.text)
    }
}
