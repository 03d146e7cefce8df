use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Engine, PipelineError};
use crate::emotion_mapping::Resolved;
use crate::ingest::{Source, SourceRecord};
use crate::prompts::{build_style_prompt, Style};
use crate::vad_space::{DriftMetric, VadPrototypeTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordStatus {
    /// All four styles completed.
    Complete,
    /// Some styles failed; see `styles`.
    Pending,
    /// The original text could not be classified.
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub classifier: String,
    pub rewriter: String,
    pub template_hash: String,
    pub config_hash: String,
    pub drift_metric: DriftMetric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum StyleOutcome {
    Complete {
        rewritten_text: String,
        rewritten: Resolved,
        drift: f64,
    },
    Failed {
        error: String,
    },
}

impl StyleOutcome {
    pub fn is_complete(&self) -> bool {
        matches!(self, StyleOutcome::Complete { .. })
    }
}

/// One source text with its per-style rewrites, detected emotions and drifts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewriteRecord {
    pub id: String,
    pub source: Source,
    pub text: String,
    pub status: RecordStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub original: Option<Resolved>,
    #[serde(default)]
    pub styles: BTreeMap<Style, StyleOutcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub run: RunMeta,
}

impl RewriteRecord {
    pub fn completed_styles(&self) -> impl Iterator<Item = Style> + '_ {
        self.styles
            .iter()
            .filter(|(_, o)| o.is_complete())
            .map(|(s, _)| *s)
    }

    /// `(rewritten text, rewritten emotion, stored drift)` for a completed style.
    pub fn outcome(&self, style: Style) -> Option<(&str, &Resolved, f64)> {
        match self.styles.get(&style)? {
            StyleOutcome::Complete {
                rewritten_text,
                rewritten,
                drift,
            } => Some((rewritten_text, rewritten, *drift)),
            StyleOutcome::Failed { .. } => None,
        }
    }

    /// Drift for `style` recomputed from the stored emotions.
    pub fn recompute_drift(&self, style: Style, table: &VadPrototypeTable) -> Option<f64> {
        let original = self.original?;
        let (_, rewritten, _) = self.outcome(style)?;
        Some(
            self.run
                .drift_metric
                .drift(table, original.emotion, rewritten.emotion),
        )
    }

    fn derive_status(&mut self) {
        self.status = if self.original.is_none() {
            RecordStatus::Failed
        } else if Style::ALL
            .iter()
            .all(|s| self.styles.get(s).is_some_and(StyleOutcome::is_complete))
        {
            RecordStatus::Complete
        } else {
            RecordStatus::Pending
        };
    }
}

impl Engine {
    async fn classify_resolved(&self, text: &str) -> Result<Resolved, PipelineError> {
        let scores = self.classifier.classify(text).await?;
        Ok(self.mapping.resolve_core(&scores)?)
    }

    async fn run_style(
        &self,
        text: &str,
        original: Resolved,
        style: Style,
    ) -> Result<StyleOutcome, PipelineError> {
        let prompt = build_style_prompt(text, style, &self.templates)?;
        let rewritten_text = self.rewriter.rewrite(&prompt).await?;
        let rewritten = self.classify_resolved(&rewritten_text).await?;
        let drift =
            self.settings
                .drift_metric
                .drift(&self.prototypes, original.emotion, rewritten.emotion);
        Ok(StyleOutcome::Complete {
            rewritten_text,
            rewritten,
            drift,
        })
    }

    /// Runs one record through every style. A failing style is recorded on
    /// the record and does not affect the others.
    pub async fn process_record(&self, rec: &SourceRecord) -> RewriteRecord {
        let mut out = RewriteRecord {
            id: rec.id.clone(),
            source: rec.source,
            text: rec.text.clone(),
            status: RecordStatus::Failed,
            original: None,
            styles: BTreeMap::new(),
            error: None,
            run: self.run_meta(),
        };
        let original = match self.classify_resolved(&rec.text).await {
            Ok(o) => o,
            Err(e) => {
                log::warn!("record `{}`: original classification failed: {e}", rec.id);
                out.error = Some(e.to_string());
                return out;
            }
        };
        out.original = Some(original);
        for style in Style::ALL {
            let outcome = match self.run_style(&rec.text, original, style).await {
                Ok(o) => o,
                Err(e) => {
                    log::warn!("record `{}` style {style}: {e}", rec.id);
                    StyleOutcome::Failed {
                        error: e.to_string(),
                    }
                }
            };
            out.styles.insert(style, outcome);
        }
        out.derive_status();
        out
    }
}
