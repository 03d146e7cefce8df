//! The six-emotion categorical space, its VAD prototype embedding and the
//! emotion drift metric.
//!
//! Every emotion label is embedded as a fixed point in valence/arousal/dominance
//! space. Drift between an original and a rewritten text is the squared
//! Euclidean distance between the prototypes of their labels.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VadError {
    #[error("{axis} component {value} is outside [0, 1]")]
    OutOfRange { axis: &'static str, value: f64 },
    #[error("{axis} component is not finite")]
    NotFinite { axis: &'static str },
    #[error("unknown emotion name `{0}`")]
    UnknownEmotion(String),
    #[error("prototype table is missing `{0}`")]
    MissingEmotion(CoreEmotion),
    #[error("`{0}` and `{1}` share the same prototype")]
    DuplicatePrototype(CoreEmotion, CoreEmotion),
    #[error("invalid prototype file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("cannot read prototype file: {0}")]
    Io(#[from] std::io::Error),
}

/// One of the six basic emotions.
///
/// Declaration order is the canonical order used for tie-breaking, matrix
/// layout and report rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoreEmotion {
    Anger,
    Disgust,
    Fear,
    Sadness,
    Surprise,
    Happiness,
}

impl CoreEmotion {
    pub const ALL: [CoreEmotion; 6] = [
        CoreEmotion::Anger,
        CoreEmotion::Disgust,
        CoreEmotion::Fear,
        CoreEmotion::Sadness,
        CoreEmotion::Surprise,
        CoreEmotion::Happiness,
    ];

    pub const COUNT: usize = 6;

    pub fn as_str(self) -> &'static str {
        match self {
            CoreEmotion::Anger => "anger",
            CoreEmotion::Disgust => "disgust",
            CoreEmotion::Fear => "fear",
            CoreEmotion::Sadness => "sadness",
            CoreEmotion::Surprise => "surprise",
            CoreEmotion::Happiness => "happiness",
        }
    }

    /// Position in [`CoreEmotion::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for CoreEmotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CoreEmotion {
    type Err = VadError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CoreEmotion::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| VadError::UnknownEmotion(s.to_string()))
    }
}

/// A point in the unit VAD cube. Serialized as `[v, a, d]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct VadVector {
    valence: f64,
    arousal: f64,
    dominance: f64,
}

impl VadVector {
    pub fn new(valence: f64, arousal: f64, dominance: f64) -> Result<Self, VadError> {
        for (axis, value) in [
            ("valence", valence),
            ("arousal", arousal),
            ("dominance", dominance),
        ] {
            if !value.is_finite() {
                return Err(VadError::NotFinite { axis });
            }
            if !(0.0..=1.0).contains(&value) {
                return Err(VadError::OutOfRange { axis, value });
            }
        }
        Ok(Self {
            valence,
            arousal,
            dominance,
        })
    }

    pub fn valence(&self) -> f64 {
        self.valence
    }

    pub fn arousal(&self) -> f64 {
        self.arousal
    }

    pub fn dominance(&self) -> f64 {
        self.dominance
    }

    pub fn components(&self) -> [f64; 3] {
        [self.valence, self.arousal, self.dominance]
    }

    pub fn squared_distance(&self, other: &VadVector) -> f64 {
        self.components()
            .iter()
            .zip(other.components())
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }
}

impl TryFrom<[f64; 3]> for VadVector {
    type Error = VadError;

    fn try_from(v: [f64; 3]) -> Result<Self, Self::Error> {
        VadVector::new(v[0], v[1], v[2])
    }
}

impl From<VadVector> for [f64; 3] {
    fn from(v: VadVector) -> Self {
        v.components()
    }
}

impl FromStr for VadVector {
    type Err = String;

    /// Parses `v,a,d`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(format!(
                "expected three comma-separated components, got `{s}`"
            ));
        }
        let mut values = [0.0; 3];
        for (slot, part) in values.iter_mut().zip(&parts) {
            *slot = part
                .parse::<f64>()
                .map_err(|e| format!("`{part}` is not a number: {e}"))?;
        }
        VadVector::try_from(values).map_err(|e| e.to_string())
    }
}

impl fmt::Display for VadVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}, {}, {})",
            self.valence, self.arousal, self.dominance
        )
    }
}

/// Total map from [`CoreEmotion`] to a prototype [`VadVector`].
#[derive(Debug, Clone, PartialEq)]
pub struct VadPrototypeTable {
    entries: [VadVector; CoreEmotion::COUNT],
}

const LOW: f64 = 0.0;
const MID: f64 = 0.5;
const HIGH: f64 = 1.0;

impl Default for VadPrototypeTable {
    /// Qualitative H/M/L levels mapped to 1.0/0.5/0.0 on each axis.
    fn default() -> Self {
        let v = |valence, arousal, dominance| VadVector {
            valence,
            arousal,
            dominance,
        };
        Self {
            entries: [
                v(LOW, HIGH, MID),   // anger
                v(LOW, MID, LOW),    // disgust
                v(LOW, HIGH, LOW),   // fear
                v(LOW, LOW, LOW),    // sadness
                v(MID, HIGH, MID),   // surprise
                v(HIGH, HIGH, HIGH), // happiness
            ],
        }
    }
}

impl VadPrototypeTable {
    /// Builds a table from one prototype per emotion, in [`CoreEmotion::ALL`] order.
    pub fn new(entries: [VadVector; CoreEmotion::COUNT]) -> Result<Self, VadError> {
        for (i, a) in entries.iter().enumerate() {
            for (j, b) in entries.iter().enumerate().skip(i + 1) {
                if a == b {
                    return Err(VadError::DuplicatePrototype(
                        CoreEmotion::ALL[i],
                        CoreEmotion::ALL[j],
                    ));
                }
            }
        }
        Ok(Self { entries })
    }

    /// Parses `{"anger": [v, a, d], ...}`; all six emotions are required.
    pub fn from_json_str(json: &str) -> Result<Self, VadError> {
        let raw: std::collections::BTreeMap<String, VadVector> = serde_json::from_str(json)?;
        let mut entries: [Option<VadVector>; CoreEmotion::COUNT] = [None; CoreEmotion::COUNT];
        for (name, vector) in raw {
            let emotion: CoreEmotion = name.parse()?;
            entries[emotion.index()] = Some(vector);
        }
        let mut out = [VadVector {
            valence: 0.0,
            arousal: 0.0,
            dominance: 0.0,
        }; CoreEmotion::COUNT];
        for (slot, (entry, emotion)) in out.iter_mut().zip(entries.iter().zip(CoreEmotion::ALL)) {
            *slot = entry.ok_or(VadError::MissingEmotion(emotion))?;
        }
        Self::new(out)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, VadError> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> String {
        let map: serde_json::Map<String, serde_json::Value> = CoreEmotion::ALL
            .iter()
            .map(|e| {
                (
                    e.as_str().to_string(),
                    serde_json::json!(self.prototype(*e)),
                )
            })
            .collect();
        serde_json::Value::Object(map).to_string()
    }

    pub fn prototype(&self, emotion: CoreEmotion) -> VadVector {
        self.entries[emotion.index()]
    }

    /// Squared Euclidean distance between the prototypes of two emotions.
    pub fn emotion_drift(&self, original: CoreEmotion, rewritten: CoreEmotion) -> f64 {
        self.prototype(original)
            .squared_distance(&self.prototype(rewritten))
    }

    /// Closest prototype to `point`; ties go to the earlier emotion in canonical order.
    pub fn nearest_emotion(&self, point: &VadVector) -> CoreEmotion {
        let mut best = CoreEmotion::ALL[0];
        let mut best_distance = f64::INFINITY;
        for emotion in CoreEmotion::ALL {
            let distance = self.prototype(emotion).squared_distance(point);
            if distance < best_distance {
                best = emotion;
                best_distance = distance;
            }
        }
        best
    }

    /// Full drift matrix indexed `[original][rewritten]`.
    pub fn drift_matrix(&self) -> [[f64; CoreEmotion::COUNT]; CoreEmotion::COUNT] {
        let mut m = [[0.0; CoreEmotion::COUNT]; CoreEmotion::COUNT];
        for a in CoreEmotion::ALL {
            for b in CoreEmotion::ALL {
                m[a.index()][b.index()] = self.emotion_drift(a, b);
            }
        }
        m
    }
}

/// Free-function form of [`VadPrototypeTable::emotion_drift`].
pub fn emotion_drift(
    original: CoreEmotion,
    rewritten: CoreEmotion,
    table: &VadPrototypeTable,
) -> f64 {
    table.emotion_drift(original, rewritten)
}

pub fn nearest_emotion(point: &VadVector, table: &VadPrototypeTable) -> CoreEmotion {
    table.nearest_emotion(point)
}

/// How a drift value is reported. `Squared` is the metric proper; `Euclidean`
/// (its square root) exists for sensitivity analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DriftMetric {
    #[default]
    Squared,
    Euclidean,
}

impl DriftMetric {
    pub fn drift(
        self,
        table: &VadPrototypeTable,
        original: CoreEmotion,
        rewritten: CoreEmotion,
    ) -> f64 {
        let squared = table.emotion_drift(original, rewritten);
        match self {
            DriftMetric::Squared => squared,
            DriftMetric::Euclidean => squared.sqrt(),
        }
    }
}
