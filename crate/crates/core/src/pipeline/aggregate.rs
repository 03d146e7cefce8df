use serde::{Deserialize, Serialize};

use super::{PipelineError, RewriteRecord};
use crate::prompts::Style;
use crate::vad_space::{CoreEmotion, VadPrototypeTable};

/// `100 * count / total` rounded half-up to two decimals, computed in integers.
pub fn percent_half_up(count: u64, total: u64) -> f64 {
    assert!(total > 0, "percentage of an empty total");
    let scaled = count as u128 * 10_000;
    let hundredths = (2 * scaled + total as u128) / (2 * total as u128);
    hundredths as f64 / 100.0
}

/// Dataset-level aggregates for one style.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StyleReport {
    pub style: Style,
    pub total: u64,
    pub preserved: u64,
    pub changed: u64,
    pub preserved_pct: f64,
    pub changed_pct: f64,
    /// Mean drift over the `total` records.
    pub edi: f64,
    /// Counts indexed `[original][rewritten]` in canonical emotion order.
    pub transition: [[u64; CoreEmotion::COUNT]; CoreEmotion::COUNT],
}

impl StyleReport {
    /// Builds a report from pre-computed counts (no transition data).
    pub fn from_counts(
        style: Style,
        total: u64,
        preserved: u64,
        edi: f64,
    ) -> Result<Self, PipelineError> {
        if total == 0 {
            return Err(PipelineError::EmptyDataset);
        }
        let changed = total.checked_sub(preserved).ok_or_else(|| {
            PipelineError::StoreFormat(format!("preserved {preserved} exceeds total {total}"))
        })?;
        Ok(Self {
            style,
            total,
            preserved,
            changed,
            preserved_pct: percent_half_up(preserved, total),
            changed_pct: percent_half_up(changed, total),
            edi,
            transition: [[0; CoreEmotion::COUNT]; CoreEmotion::COUNT],
        })
    }

    pub fn trace(&self) -> u64 {
        (0..CoreEmotion::COUNT).map(|i| self.transition[i][i]).sum()
    }

    pub fn cell_sum(&self) -> u64 {
        self.transition.iter().flatten().sum()
    }
}

/// Aggregates every record whose `style` completed.
///
/// Stored drifts are checked against a recomputation from the stored emotions.
pub fn aggregate<'a>(
    records: impl IntoIterator<Item = &'a RewriteRecord>,
    style: Style,
    table: &VadPrototypeTable,
) -> Result<StyleReport, PipelineError> {
    let mut transition = [[0u64; CoreEmotion::COUNT]; CoreEmotion::COUNT];
    let mut total = 0u64;
    let mut drift_sum = 0.0;
    for rec in records {
        let (Some(original), Some((_, rewritten, stored))) = (rec.original, rec.outcome(style))
        else {
            continue;
        };
        let recomputed = rec
            .run
            .drift_metric
            .drift(table, original.emotion, rewritten.emotion);
        if recomputed != stored {
            return Err(PipelineError::CorruptRecord {
                id: rec.id.clone(),
                style,
                stored,
                recomputed,
            });
        }
        transition[original.emotion.index()][rewritten.emotion.index()] += 1;
        drift_sum += recomputed;
        total += 1;
    }
    if total == 0 {
        return Err(PipelineError::EmptyDataset);
    }
    let preserved = (0..CoreEmotion::COUNT).map(|i| transition[i][i]).sum();
    let mut report = StyleReport::from_counts(style, total, preserved, drift_sum / total as f64)?;
    report.transition = transition;
    Ok(report)
}
