//! Collapses the 28 GoEmotions labels into the six core emotions and resolves
//! a classifier score vector to a single [`CoreEmotion`].

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vad_space::CoreEmotion;

#[derive(Debug, Error)]
pub enum MappingError {
    #[error("unknown emotion label `{0}`")]
    UnknownLabel(String),
    #[error("`neutral` has no core emotion; resolve the full score vector instead")]
    NeutralUnmapped,
    #[error("no non-neutral label has a positive score")]
    NoUsableLabel,
    #[error("score {score} for `{label}` is outside [0, 1]")]
    ScoreOutOfRange { label: FineLabel, score: f64 },
    #[error("score vector has no non-neutral label")]
    OnlyNeutral,
    #[error("mapping table has no entry for `{0}`")]
    Unmapped(FineLabel),
    #[error("mapping table leaves `{0}` without any label")]
    EmptyCore(CoreEmotion),
    #[error("unknown core emotion `{0}`")]
    UnknownCore(String),
    #[error("invalid mapping file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("cannot read mapping file: {0}")]
    Io(#[from] std::io::Error),
}

macro_rules! fine_labels {
    ($($variant:ident => $name:literal),+ $(,)?) => {
        /// A GoEmotions label. Variants are declared in lexicographic order of
        /// their names, so the derived `Ord` is the name order.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(rename_all = "lowercase")]
        pub enum FineLabel {
            $($variant),+
        }

        impl FineLabel {
            pub const ALL: [FineLabel; 28] = [$(FineLabel::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $(FineLabel::$variant => $name),+
                }
            }
        }
    };
}

fine_labels! {
    Admiration => "admiration",
    Amusement => "amusement",
    Anger => "anger",
    Annoyance => "annoyance",
    Approval => "approval",
    Caring => "caring",
    Confusion => "confusion",
    Curiosity => "curiosity",
    Desire => "desire",
    Disappointment => "disappointment",
    Disapproval => "disapproval",
    Disgust => "disgust",
    Embarrassment => "embarrassment",
    Excitement => "excitement",
    Fear => "fear",
    Gratitude => "gratitude",
    Grief => "grief",
    Joy => "joy",
    Love => "love",
    Nervousness => "nervousness",
    Neutral => "neutral",
    Optimism => "optimism",
    Pride => "pride",
    Realization => "realization",
    Relief => "relief",
    Remorse => "remorse",
    Sadness => "sadness",
    Surprise => "surprise",
}

impl FineLabel {
    pub fn is_neutral(self) -> bool {
        self == FineLabel::Neutral
    }
}

impl fmt::Display for FineLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FineLabel {
    type Err = MappingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FineLabel::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| MappingError::UnknownLabel(s.to_string()))
    }
}

/// Classifier output: a score in `[0, 1]` per label, absent labels scoring 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelScores {
    scores: BTreeMap<FineLabel, f64>,
}

impl LabelScores {
    pub fn new(scores: impl IntoIterator<Item = (FineLabel, f64)>) -> Result<Self, MappingError> {
        let mut map = BTreeMap::new();
        for (label, score) in scores {
            if !score.is_finite() || !(0.0..=1.0).contains(&score) {
                return Err(MappingError::ScoreOutOfRange { label, score });
            }
            map.insert(label, score);
        }
        if map.keys().all(|l| l.is_neutral()) {
            return Err(MappingError::OnlyNeutral);
        }
        Ok(Self { scores: map })
    }

    /// Builds from label names, rejecting anything outside the 28-label vocabulary.
    pub fn from_named<'a>(
        scores: impl IntoIterator<Item = (&'a str, f64)>,
    ) -> Result<Self, MappingError> {
        let parsed = scores
            .into_iter()
            .map(|(name, score)| name.parse::<FineLabel>().map(|l| (l, score)))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(parsed)
    }

    pub fn get(&self, label: FineLabel) -> f64 {
        self.scores.get(&label).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (FineLabel, f64)> + '_ {
        self.scores.iter().map(|(l, s)| (*l, *s))
    }

    /// Multiplies every score by `factor`, clamping at 1.
    pub fn scaled(&self, factor: f64) -> Result<Self, MappingError> {
        Self::new(self.iter().map(|(l, s)| (l, (s * factor).min(1.0))))
    }

    /// Highest-scoring label among those accepted by `keep`; ties go to the
    /// lexicographically smaller name. Missing labels count as 0.
    fn argmax(&self, keep: impl Fn(FineLabel) -> bool) -> (FineLabel, f64) {
        let mut best: Option<(FineLabel, f64)> = None;
        for label in FineLabel::ALL.into_iter().filter(|l| keep(*l)) {
            let score = self.get(label);
            match best {
                Some((_, s)) if score <= s => {}
                _ => best = Some((label, score)),
            }
        }
        best.expect("label vocabulary is non-empty")
    }
}

/// Total map from the 27 non-neutral labels to a core emotion.
#[derive(Debug, Clone, PartialEq)]
pub struct CoreMappingTable {
    entries: BTreeMap<FineLabel, CoreEmotion>,
}

impl Default for CoreMappingTable {
    fn default() -> Self {
        use CoreEmotion as C;
        use FineLabel as F;
        let groups: [(C, &[F]); 6] = [
            (C::Disgust, &[F::Disgust]),
            (C::Anger, &[F::Anger, F::Annoyance, F::Disapproval]),
            (C::Fear, &[F::Fear, F::Nervousness]),
            (
                C::Sadness,
                &[
                    F::Sadness,
                    F::Disappointment,
                    F::Grief,
                    F::Remorse,
                    F::Embarrassment,
                ],
            ),
            (
                C::Surprise,
                &[F::Surprise, F::Realization, F::Confusion, F::Curiosity],
            ),
            (
                C::Happiness,
                &[
                    F::Joy,
                    F::Amusement,
                    F::Excitement,
                    F::Optimism,
                    F::Pride,
                    F::Relief,
                    F::Admiration,
                    F::Approval,
                    F::Gratitude,
                    F::Love,
                    F::Caring,
                    F::Desire,
                ],
            ),
        ];
        let entries = groups
            .iter()
            .flat_map(|(core, labels)| labels.iter().map(move |l| (*l, *core)))
            .collect();
        Self { entries }
    }
}

impl CoreMappingTable {
    /// Validates totality over the non-neutral labels and that every core
    /// emotion owns at least one label.
    pub fn new(entries: BTreeMap<FineLabel, CoreEmotion>) -> Result<Self, MappingError> {
        if entries.contains_key(&FineLabel::Neutral) {
            return Err(MappingError::NeutralUnmapped);
        }
        if let Some(missing) = FineLabel::ALL
            .into_iter()
            .find(|l| !l.is_neutral() && !entries.contains_key(l))
        {
            return Err(MappingError::Unmapped(missing));
        }
        if let Some(empty) = CoreEmotion::ALL
            .into_iter()
            .find(|c| !entries.values().any(|v| v == c))
        {
            return Err(MappingError::EmptyCore(empty));
        }
        Ok(Self { entries })
    }

    /// Parses `{"annoyance": "anger", ...}`.
    pub fn from_json_str(json: &str) -> Result<Self, MappingError> {
        let raw: BTreeMap<String, String> = serde_json::from_str(json)?;
        let mut entries = BTreeMap::new();
        for (label, core) in raw {
            let label: FineLabel = label.parse()?;
            let core: CoreEmotion = core.parse().map_err(|_| MappingError::UnknownCore(core))?;
            entries.insert(label, core);
        }
        Self::new(entries)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, MappingError> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn map_fine_to_core(&self, label: FineLabel) -> Result<CoreEmotion, MappingError> {
        if label.is_neutral() {
            return Err(MappingError::NeutralUnmapped);
        }
        self.entries
            .get(&label)
            .copied()
            .ok_or(MappingError::Unmapped(label))
    }

    /// Labels owned by `core`, in name order.
    pub fn preimage(&self, core: CoreEmotion) -> Vec<FineLabel> {
        self.entries
            .iter()
            .filter(|(_, c)| **c == core)
            .map(|(l, _)| *l)
            .collect()
    }

    /// Resolves a score vector to one core emotion.
    ///
    /// The top label decides unless it is `neutral`, in which case the best
    /// non-neutral label is used. The returned confidence is the score of the
    /// label actually mapped.
    pub fn resolve_core(&self, scores: &LabelScores) -> Result<Resolved, MappingError> {
        // A zero best non-neutral score means neutral is on top (or everything
        // is zero); either way nothing usable remains.
        let (label, score) = scores.argmax(|l| !l.is_neutral());
        if score == 0.0 {
            return Err(MappingError::NoUsableLabel);
        }
        Ok(Resolved {
            emotion: self.map_fine_to_core(label)?,
            confidence: score,
            label,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resolved {
    pub emotion: CoreEmotion,
    pub confidence: f64,
    /// The fine label the emotion came from.
    pub label: FineLabel,
}

pub fn map_fine_to_core(
    label: FineLabel,
    table: &CoreMappingTable,
) -> Result<CoreEmotion, MappingError> {
    table.map_fine_to_core(label)
}

pub fn resolve_core(
    scores: &LabelScores,
    table: &CoreMappingTable,
) -> Result<Resolved, MappingError> {
    table.resolve_core(scores)
}
