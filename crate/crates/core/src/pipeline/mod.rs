//! classify → rewrite ×4 → re-classify → drift, per record; dataset runs with
//! checkpointing; aggregation to EDI and transition counts; mitigation
//! selection, VAD-target refinement and output flagging.

use std::collections::BTreeSet;
use std::sync::Arc;

use thiserror::Error;

use crate::backends::{BackendError, ClassifierBackend, RewriterBackend};
use crate::emotion_mapping::{CoreMappingTable, MappingError};
use crate::prompts::{ExemplarStore, PromptError, Style, StyleTemplates, DEFAULT_FEW_SHOT_K};
use crate::vad_space::{CoreEmotion, DriftMetric, VadPrototypeTable, VadVector};

mod aggregate;
mod moderate;
mod record;
mod store;

pub use aggregate::{aggregate, percent_half_up, StyleReport};
pub use moderate::{
    flag_output, moderate, refine_with_vad_target, select_mitigating_style, ModerationOutcome,
    RefineRound, RefineTrace, Selection, FLAG_PREFIX,
};
pub use record::{RecordStatus, RewriteRecord, RunMeta, StyleOutcome};
pub use store::{run_dataset, Manifest, RecordStore, RunOptions, RunSummary, DEFAULT_BATCH_SIZE};

pub const DEFAULT_DEAD_BAND: f64 = 0.25;
pub const DEFAULT_MAX_ROUNDS: u32 = 2;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("no complete records for this style")]
    EmptyDataset,
    #[error("record has no completed style")]
    NoCompletedStyle,
    #[error("record `{id}` style {style}: stored drift {stored} but recomputed {recomputed}")]
    CorruptRecord {
        id: String,
        style: Style,
        stored: f64,
        recomputed: f64,
    },
    #[error("text is already flagged")]
    AlreadyFlagged,
    #[error("input text is empty")]
    EmptyText,
    #[error("store at {path} belongs to config {found}, not {expected}")]
    ConfigMismatch {
        path: String,
        expected: String,
        found: String,
    },
    #[error("invalid record store: {0}")]
    StoreFormat(String),
    #[error("record store I/O: {0}")]
    Store(#[from] std::io::Error),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Mapping(#[from] MappingError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineSettings {
    pub drift_metric: DriftMetric,
    /// Where mitigation should land; defaults to the happiness prototype.
    pub target: VadVector,
    pub dead_band: f64,
    pub max_rounds: u32,
    pub few_shot_k: usize,
    /// Core emotions that mark raw text as harmful in moderation.
    pub harmful: BTreeSet<CoreEmotion>,
}

impl Default for EngineSettings {
    fn default() -> Self {
        Self {
            drift_metric: DriftMetric::Squared,
            target: VadPrototypeTable::default().prototype(CoreEmotion::Happiness),
            dead_band: DEFAULT_DEAD_BAND,
            max_rounds: DEFAULT_MAX_ROUNDS,
            few_shot_k: DEFAULT_FEW_SHOT_K,
            harmful: BTreeSet::from([CoreEmotion::Anger, CoreEmotion::Disgust, CoreEmotion::Fear]),
        }
    }
}

/// Backends plus every table the pipeline consults. Cheap to share behind an `Arc`.
pub struct Engine {
    pub classifier: Arc<dyn ClassifierBackend>,
    pub rewriter: Arc<dyn RewriterBackend>,
    pub prototypes: VadPrototypeTable,
    pub mapping: CoreMappingTable,
    pub templates: StyleTemplates,
    pub exemplars: ExemplarStore,
    pub settings: EngineSettings,
    /// Hash of the run configuration, stamped into every record.
    pub config_hash: String,
}

impl Engine {
    pub fn new(classifier: Arc<dyn ClassifierBackend>, rewriter: Arc<dyn RewriterBackend>) -> Self {
        Self {
            classifier,
            rewriter,
            prototypes: VadPrototypeTable::default(),
            mapping: CoreMappingTable::default(),
            templates: StyleTemplates::default(),
            exemplars: ExemplarStore::default(),
            settings: EngineSettings::default(),
            config_hash: String::new(),
        }
    }

    /// Offline engine over the deterministic mocks.
    pub fn mock() -> Self {
        Self::new(
            Arc::new(crate::backends::MockClassifier::new()),
            Arc::new(crate::backends::MockRewriter::new()),
        )
    }

    pub fn run_meta(&self) -> RunMeta {
        RunMeta {
            classifier: self.classifier.model_id().to_string(),
            rewriter: self.rewriter.model_id().to_string(),
            template_hash: self.templates.content_hash(),
            config_hash: self.config_hash.clone(),
            drift_metric: self.settings.drift_metric,
        }
    }
}
