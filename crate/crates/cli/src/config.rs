//! Pipeline configuration file.
//!
//! ```json
//! {
//!   "annotations_dir": "annotations",
//!   "generator": {"backend": "replay", "path": "transcript.json"},
//!   "detector": {"backend": "oracle"},
//!   "vqa": {"backend": "remote", "base_url": "http://127.0.0.1:8700"},
//!   "ocr": {"backend": "oracle"},
//!   "fluency": {"backend": "constant", "score": 1.0},
//!   "experts": {"detection_threshold": 0.25, "fluency_threshold": 0.75},
//!   "weights": "qwen",
//!   "max_pairs_per_image": null,
//!   "beta": 0.1,
//!   "timeout_secs": 30
//! }
//! ```
//!
//! Every key is optional. Relative paths resolve against the directory of
//! the config file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::Deserialize;
use visverify_core::dpo::DEFAULT_BETA;
use visverify_core::experts::{
    BinaryVqa, ConstantFluency, ConstantGenerator, Detector, FluencyScorer, OcrReader, OracleDetector, OracleOcr,
    OracleVqa, RemoteClient, RemoteDetector, RemoteFluency, RemoteGenerator, RemoteOcr, RemoteVqa, ReplayGenerator,
    TextGenerator,
};
use visverify_core::preference::PairOptions;
use visverify_core::{AnnotationStore, AspectKind, AspectWeights, ExpertConfig, Experts};

/// Where one expert role is served from.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "backend", rename_all = "snake_case", deny_unknown_fields)]
pub enum Backend {
    /// Ground truth from the annotation directory.
    Oracle,
    Remote {
        base_url: String,
    },
    /// Fixed output: `text` for the generator, `score` for fluency.
    Constant {
        #[serde(default)]
        text: Option<String>,
        #[serde(default)]
        score: Option<f64>,
    },
    /// Recorded generator answers; prompts without one get `fallback`, or
    /// fail when it is absent.
    Replay {
        path: PathBuf,
        #[serde(default)]
        fallback: Option<String>,
    },
    /// The worked examples shipped with the extraction templates.
    InContext,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum WeightsSpec {
    Preset(String),
    Map(BTreeMap<AspectKind, f64>),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub annotations_dir: Option<PathBuf>,
    #[serde(default)]
    pub generator: Option<Backend>,
    #[serde(default = "oracle")]
    pub detector: Backend,
    #[serde(default = "oracle")]
    pub vqa: Backend,
    #[serde(default = "oracle")]
    pub ocr: Backend,
    #[serde(default = "constant_fluency")]
    pub fluency: Backend,
    #[serde(default)]
    pub experts: ExpertConfig,
    #[serde(default)]
    pub weights: Option<WeightsSpec>,
    #[serde(default)]
    pub max_pairs_per_image: Option<usize>,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
}

fn oracle() -> Backend {
    Backend::Oracle
}

fn constant_fluency() -> Backend {
    Backend::Constant {
        text: None,
        score: Some(1.0),
    }
}

fn default_beta() -> f64 {
    DEFAULT_BETA
}

fn default_timeout() -> f64 {
    30.0
}

impl Default for PipelineConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("empty config is valid")
    }
}

#[derive(Debug, thiserror::Error)]
#[error("config: {0}")]
pub struct ConfigError(pub String);

fn err(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

impl PipelineConfig {
    /// Reads a config file, resolving relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| err(format!("{}: {e}", path.display())))?;
        let mut cfg: Self = serde_json::from_str(&text).map_err(|e| err(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(dir) = &mut self.annotations_dir {
            fix(dir);
        }
        if let Some(Backend::Replay { path, .. }) = &mut self.generator {
            fix(path);
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.experts.validate().map_err(err)?;
        self.weights()?;
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(err(format!("beta = {} must be positive", self.beta)));
        }
        if !(self.timeout_secs > 0.0 && self.timeout_secs.is_finite()) {
            return Err(err(format!("timeout_secs = {} must be positive", self.timeout_secs)));
        }
        if self.max_pairs_per_image == Some(0) {
            return Err(err("max_pairs_per_image must be at least 1"));
        }
        Ok(())
    }

    /// Checks that every verification role has what its backend needs.
    pub fn validate_roles(&self) -> Result<(), ConfigError> {
        for (role, backend) in self.roles() {
            match backend {
                Backend::Remote { base_url } if base_url.trim().is_empty() => {
                    return Err(err(format!("{role}: remote backend needs base_url")));
                }
                Backend::Oracle if self.annotations_dir.is_none() => {
                    return Err(err(format!("{role}: oracle backend needs annotations_dir")));
                }
                _ => {}
            }
        }
        Ok(())
    }

    fn roles(&self) -> [(&'static str, &Backend); 4] {
        [
            ("detector", &self.detector),
            ("vqa", &self.vqa),
            ("ocr", &self.ocr),
            ("fluency", &self.fluency),
        ]
    }

    pub fn weights(&self) -> Result<AspectWeights, ConfigError> {
        match &self.weights {
            None => Ok(AspectWeights::default()),
            Some(WeightsSpec::Preset(name)) => {
                AspectWeights::preset(name).ok_or_else(|| err(format!("unknown weights preset {name:?}")))
            }
            Some(WeightsSpec::Map(map)) => AspectWeights::try_from(map.clone()).map_err(|e| err(e.to_string())),
        }
    }

    pub fn pair_options(&self) -> PairOptions {
        PairOptions {
            max_pairs_per_image: self.max_pairs_per_image,
        }
    }

    fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_secs)
    }

    fn client(&self, base_url: &str) -> RemoteClient {
        RemoteClient::new(base_url, self.timeout())
    }

    pub fn annotations(&self) -> Result<Arc<AnnotationStore>, ConfigError> {
        let dir = self
            .annotations_dir
            .as_ref()
            .ok_or_else(|| err("annotations_dir is not set"))?;
        AnnotationStore::load_dir(dir).map(Arc::new).map_err(|e| err(e.to_string()))
    }

    pub fn generator(&self) -> Result<Box<dyn TextGenerator>, ConfigError> {
        match &self.generator {
            None => Err(err("no generator configured")),
            Some(Backend::Remote { base_url }) => Ok(Box::new(RemoteGenerator(self.client(base_url)))),
            Some(Backend::Constant { text: Some(t), .. }) => Ok(Box::new(ConstantGenerator(t.clone()))),
            Some(Backend::Replay { path, fallback }) => {
                let g = ReplayGenerator::from_file(path).map_err(err)?;
                Ok(Box::new(match fallback {
                    Some(f) => g.with_fallback(f.clone()),
                    None => g,
                }))
            }
            Some(Backend::InContext) => Ok(Box::new(ReplayGenerator::from_in_context_examples())),
            Some(other) => Err(err(format!("generator cannot use backend {other:?}"))),
        }
    }

    /// Builds the verification experts. The annotation store is loaded only
    /// if some role needs it.
    pub fn experts(&self) -> Result<Experts, ConfigError> {
        self.validate_roles()?;
        let needs_store = self.roles().iter().any(|(_, b)| **b == Backend::Oracle);
        let store = if needs_store { Some(self.annotations()?) } else { None };
        let store = || store.clone().expect("store loaded for oracle roles");
        let unsupported = |role: &str, b: &Backend| err(format!("{role} cannot use backend {b:?}"));

        let detector: Arc<dyn Detector> = match &self.detector {
            Backend::Oracle => Arc::new(OracleDetector::new(store())),
            Backend::Remote { base_url } => Arc::new(RemoteDetector(self.client(base_url))),
            b => return Err(unsupported("detector", b)),
        };
        let vqa: Arc<dyn BinaryVqa> = match &self.vqa {
            Backend::Oracle => Arc::new(OracleVqa::new(store())),
            Backend::Remote { base_url } => Arc::new(RemoteVqa(self.client(base_url))),
            b => return Err(unsupported("vqa", b)),
        };
        let ocr: Arc<dyn OcrReader> = match &self.ocr {
            Backend::Oracle => Arc::new(OracleOcr::new(store())),
            Backend::Remote { base_url } => Arc::new(RemoteOcr(self.client(base_url))),
            b => return Err(unsupported("ocr", b)),
        };
        let fluency: Arc<dyn FluencyScorer> = match &self.fluency {
            Backend::Constant { score: Some(s), .. } if (0.0..=1.0).contains(s) => Arc::new(ConstantFluency(*s)),
            Backend::Remote { base_url } => Arc::new(RemoteFluency(self.client(base_url))),
            b => return Err(unsupported("fluency", b)),
        };
        Ok(Experts {
            detector,
            vqa,
            ocr,
            fluency,
        })
    }
}
