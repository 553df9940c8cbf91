//! Fine-grained verification of multimodal model responses.
//!
//! A response is decomposed into check-worthy parts, each part is compiled
//! into a small DAG of atomic expert tasks, the tasks are executed against
//! pluggable expert backends, and the per-part verdicts are aggregated into
//! a score used to build preference pairs. DPO loss math and CHAIR metrics
//! live alongside for evaluation.

pub mod annotation;
pub mod chair;
pub mod dpo;
pub mod error;
pub mod experts;
pub mod extraction;
pub mod layout;
pub mod pipeline;
pub mod preference;
pub mod prompts;
pub mod types;
pub mod verify;

pub use annotation::{AnnotationStore, SceneAnnotation};
pub use error::{
    AnnotationError, ChairError, DpoError, ExpertError, ExtractionError, PreferenceError, TypeError, VerifyError,
};
pub use experts::{ExpertConfig, Experts};
pub use preference::AspectWeights;
pub use types::*;
