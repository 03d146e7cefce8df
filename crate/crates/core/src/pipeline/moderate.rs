use serde::Serialize;

use super::{Engine, PipelineError, RewriteRecord, StyleOutcome};
use crate::backends::BackendError;
use crate::emotion_mapping::Resolved;
use crate::ingest::{Source, SourceRecord};
use crate::prompts::{build_vad_target_prompt, PromptError, Style, VadDirective};
use crate::vad_space::{CoreEmotion, VadPrototypeTable, VadVector};

pub const FLAG_PREFIX: &str = "[rewritten: style=";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Selection {
    pub style: Style,
    pub text: String,
    pub emotion: CoreEmotion,
    /// Squared distance from the rewritten emotion's prototype to the target.
    pub drift_to_target: f64,
}

/// Picks the completed style whose rewritten emotion lies closest to
/// `target`; ties go to the earlier style (formal, casual, inspirational, humor).
pub fn select_mitigating_style(
    rec: &RewriteRecord,
    target: &VadVector,
    table: &VadPrototypeTable,
) -> Result<Selection, PipelineError> {
    let mut best: Option<Selection> = None;
    for style in Style::ALL {
        let Some((text, rewritten, _)) = rec.outcome(style) else {
            continue;
        };
        let distance = table.prototype(rewritten.emotion).squared_distance(target);
        if best.as_ref().is_none_or(|b| distance < b.drift_to_target) {
            best = Some(Selection {
                style,
                text: text.to_string(),
                emotion: rewritten.emotion,
                drift_to_target: distance,
            });
        }
    }
    best.ok_or(PipelineError::NoCompletedStyle)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefineRound {
    pub round: u32,
    pub directive: String,
    pub instructions: [String; 3],
    pub text: String,
    pub emotion: CoreEmotion,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefineTrace {
    pub final_text: String,
    pub final_emotion: CoreEmotion,
    pub converged: bool,
    pub rounds: Vec<RefineRound>,
}

/// Rewrites `text` toward `target` with per-axis few-shot prompts.
///
/// Stops once the detected emotion's nearest region matches the target's,
/// when every axis is inside the dead-band, or after `max_rounds`.
/// Non-convergence is reported in the trace, not as an error.
pub async fn refine_with_vad_target(
    engine: &Engine,
    text: &str,
    current_emotion: CoreEmotion,
    target: &VadVector,
) -> Result<RefineTrace, PipelineError> {
    let table = &engine.prototypes;
    let goal = table.nearest_emotion(target);
    let mut trace = RefineTrace {
        final_text: text.to_string(),
        final_emotion: current_emotion,
        converged: current_emotion == goal,
        rounds: Vec::new(),
    };
    for round in 1..=engine.settings.max_rounds {
        if trace.converged {
            break;
        }
        let current = table.prototype(trace.final_emotion);
        let directive = match VadDirective::derive(&current, target, engine.settings.dead_band) {
            Ok(d) => d,
            Err(PromptError::AllKeep) => break,
            Err(e) => return Err(e.into()),
        };
        let prompt = build_vad_target_prompt(
            &trace.final_text,
            &current,
            &directive,
            &engine.exemplars,
            engine.settings.few_shot_k,
        )?;
        let rewritten = engine.rewriter.rewrite(&prompt).await?;
        let scores = engine.classifier.classify(&rewritten).await?;
        let resolved = engine.mapping.resolve_core(&scores)?;
        trace.rounds.push(RefineRound {
            round,
            directive: directive.signature(),
            instructions: directive.instructions(),
            text: rewritten.clone(),
            emotion: resolved.emotion,
            confidence: resolved.confidence,
        });
        trace.final_text = rewritten;
        trace.final_emotion = resolved.emotion;
        trace.converged = table.nearest_emotion(&table.prototype(resolved.emotion)) == goal;
    }
    Ok(trace)
}

fn is_flagged(text: &str) -> bool {
    text.lines()
        .last()
        .is_some_and(|l| l.starts_with(FLAG_PREFIX) && l.ends_with(']'))
}

/// Appends `\n[rewritten: style=<s>; emotion-drift=<d>]` with four decimals.
pub fn flag_output(text: &str, style: Style, drift: f64) -> Result<String, PipelineError> {
    if is_flagged(text) {
        return Err(PipelineError::AlreadyFlagged);
    }
    Ok(format!(
        "{text}\n{FLAG_PREFIX}{style}; emotion-drift={drift:.4}]"
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "lowercase")]
pub enum ModerationOutcome {
    /// The text is not harmful under the configured emotions; returned as is.
    Benign { text: String, emotion: CoreEmotion },
    Moderated {
        /// Flagged rewrite.
        text: String,
        style: Style,
        original_emotion: CoreEmotion,
        rewritten_emotion: CoreEmotion,
        drift: f64,
        #[serde(skip_serializing_if = "Option::is_none")]
        refinement: Option<RefineTrace>,
    },
}

/// Filter → rewrite in every style → pick the closest to the target →
/// optionally refine → flag.
///
/// Fails rather than returning unrewritten harmful text.
pub async fn moderate(
    engine: &Engine,
    text: &str,
    target: Option<&VadVector>,
    refine: bool,
) -> Result<ModerationOutcome, PipelineError> {
    if text.trim().is_empty() {
        return Err(PipelineError::EmptyText);
    }
    let target = target.copied().unwrap_or(engine.settings.target);
    let scores = engine.classifier.classify(text).await?;
    let original: Resolved = engine.mapping.resolve_core(&scores)?;
    if !engine.settings.harmful.contains(&original.emotion) {
        return Ok(ModerationOutcome::Benign {
            text: text.to_string(),
            emotion: original.emotion,
        });
    }

    let rec = engine
        .process_record(&SourceRecord {
            id: "moderate".into(),
            text: text.to_string(),
            source: Source::Generic,
            harm_labels: Default::default(),
        })
        .await;
    let selection = match select_mitigating_style(&rec, &target, &engine.prototypes) {
        Ok(s) => s,
        Err(PipelineError::NoCompletedStyle) => {
            // surface the first backend failure so callers can tell outages apart
            let first = rec.error.clone().or_else(|| {
                rec.styles.values().find_map(|o| match o {
                    StyleOutcome::Failed { error } => Some(error.clone()),
                    StyleOutcome::Complete { .. } => None,
                })
            });
            return Err(match first {
                Some(e) if e.starts_with("transport error") => BackendError::Transport(e).into(),
                _ => PipelineError::NoCompletedStyle,
            });
        }
        Err(e) => return Err(e),
    };

    let (final_text, final_emotion, refinement) = if refine {
        let trace =
            refine_with_vad_target(engine, &selection.text, selection.emotion, &target).await?;
        (trace.final_text.clone(), trace.final_emotion, Some(trace))
    } else {
        (selection.text.clone(), selection.emotion, None)
    };
    let drift =
        engine
            .settings
            .drift_metric
            .drift(&engine.prototypes, original.emotion, final_emotion);
    Ok(ModerationOutcome::Moderated {
        text: flag_output(&final_text, selection.style, drift)?,
        style: selection.style,
        original_emotion: original.emotion,
        rewritten_emotion: final_emotion,
        drift,
        refinement,
    })
}
