//! Emotion drift measurement for stylistic rewrites of harmful text.
//!
//! Texts are classified into fine-grained labels, collapsed to six core
//! emotions, rewritten in four styles and re-classified. Drift between the
//! original and rewritten emotion is measured in a valence-arousal-dominance
//! space and aggregated per dataset and style.

pub mod backends;
pub mod emotion_mapping;
pub mod ingest;
pub mod pipeline;
pub mod prompts;
pub mod report;
#[cfg(feature = "testing")]
pub mod testing;
pub mod vad_space;

pub use backends::{BackendError, ClassifierBackend, RewriterBackend};
pub use emotion_mapping::{CoreMappingTable, FineLabel, LabelScores, MappingError, Resolved};
pub use ingest::{IngestError, Source, SourceRecord};
pub use pipeline::{Engine, EngineSettings, PipelineError, RewriteRecord, StyleReport};
pub use prompts::{RenderedPrompt, Style};
pub use report::{ReportBundle, ReportError};
pub use vad_space::{CoreEmotion, DriftMetric, VadError, VadPrototypeTable, VadVector};
