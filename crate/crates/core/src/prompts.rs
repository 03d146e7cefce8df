//! Style-rewrite and VAD-target prompt construction.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::vad_space::VadVector;

pub const TEXT_PLACEHOLDER: &str = "{text}";
pub const DEFAULT_FEW_SHOT_K: usize = 3;

const BUNDLED_TEMPLATES: &str = include_str!("../assets/templates.json");
const BUNDLED_EXEMPLARS: &str = include_str!("../assets/exemplars.json");

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("input text is empty")]
    EmptyText,
    #[error("user template for `{0}` must contain `{{text}}` exactly once (found {1})")]
    Placeholder(String, usize),
    #[error("few-shot pair {index} for `{key}` has an empty side")]
    EmptyExample { key: String, index: usize },
    #[error("no template for style `{0}`")]
    MissingStyle(Style),
    #[error("unknown style `{0}`")]
    UnknownStyle(String),
    #[error("a VAD directive needs at least one axis that is not `keep`")]
    AllKeep,
    #[error("invalid template file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("cannot read template file: {0}")]
    Io(#[from] std::io::Error),
}

/// Rewriting styles, in tie-break order (formal first).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Style {
    Formal,
    Casual,
    Inspirational,
    Humor,
}

impl Style {
    pub const ALL: [Style; 4] = [
        Style::Formal,
        Style::Casual,
        Style::Inspirational,
        Style::Humor,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Style::Formal => "formal",
            Style::Casual => "casual",
            Style::Inspirational => "inspirational",
            Style::Humor => "humor",
        }
    }

    /// Capitalized name used in report tables.
    pub fn title(self) -> &'static str {
        match self {
            Style::Formal => "Formal",
            Style::Casual => "Casual",
            Style::Inspirational => "Inspirational",
            Style::Humor => "Humor",
        }
    }
}

impl fmt::Display for Style {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Style {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Style::ALL
            .into_iter()
            .find(|st| st.as_str() == s || st.title() == s)
            .ok_or_else(|| PromptError::UnknownStyle(s.to_string()))
    }
}

/// A system/user message pair ready to send to a rewriter.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub system: String,
    pub user: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub system: String,
    pub user: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub few_shot: Vec<(String, String)>,
}

impl PromptTemplate {
    fn validate(&self, key: &str) -> Result<(), PromptError> {
        let n = self.user.matches(TEXT_PLACEHOLDER).count();
        if n != 1 {
            return Err(PromptError::Placeholder(key.to_string(), n));
        }
        validate_pairs(key, &self.few_shot)
    }

    /// Substitutes the text for the placeholder. The replacement is not
    /// rescanned, so a text that itself contains `{text}` is inserted verbatim.
    fn render(&self, text: &str) -> RenderedPrompt {
        let (head, tail) = self
            .user
            .split_once(TEXT_PLACEHOLDER)
            .expect("validated template has a placeholder");
        RenderedPrompt {
            system: self.system.clone(),
            user: format!("{head}{text}{tail}"),
        }
    }
}

fn validate_pairs(key: &str, pairs: &[(String, String)]) -> Result<(), PromptError> {
    for (index, (input, output)) in pairs.iter().enumerate() {
        if input.trim().is_empty() || output.trim().is_empty() {
            return Err(PromptError::EmptyExample {
                key: key.to_string(),
                index,
            });
        }
    }
    Ok(())
}

/// One template per style.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StyleTemplates {
    templates: BTreeMap<Style, PromptTemplate>,
}

impl Default for StyleTemplates {
    fn default() -> Self {
        Self::from_json_str(BUNDLED_TEMPLATES).expect("bundled templates are valid")
    }
}

impl StyleTemplates {
    pub fn new(templates: BTreeMap<Style, PromptTemplate>) -> Result<Self, PromptError> {
        for style in Style::ALL {
            templates
                .get(&style)
                .ok_or(PromptError::MissingStyle(style))?
                .validate(style.as_str())?;
        }
        Ok(Self { templates })
    }

    pub fn from_json_str(json: &str) -> Result<Self, PromptError> {
        Self::new(serde_json::from_str(json)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PromptError> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn get(&self, style: Style) -> &PromptTemplate {
        &self.templates[&style]
    }

    /// Hex SHA-256 of the canonical JSON form; recorded with every run.
    pub fn content_hash(&self) -> String {
        let json = serde_json::to_vec(&self.templates).expect("templates serialize");
        hex::encode(Sha256::digest(&json))
    }
}

/// Zero-shot rewrite prompt for one style.
pub fn build_style_prompt(
    text: &str,
    style: Style,
    templates: &StyleTemplates,
) -> Result<RenderedPrompt, PromptError> {
    let text = text.trim();
    if text.is_empty() {
        return Err(PromptError::EmptyText);
    }
    Ok(templates.get(style).render(text))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AxisAction {
    Increase,
    Decrease,
    Keep,
}

impl AxisAction {
    fn symbol(self) -> char {
        match self {
            AxisAction::Increase => '+',
            AxisAction::Decrease => '-',
            AxisAction::Keep => '=',
        }
    }

    /// Compares `current` to `target` with a symmetric dead-band.
    pub fn toward(current: f64, target: f64, dead_band: f64) -> Self {
        let delta = target - current;
        if delta > dead_band {
            AxisAction::Increase
        } else if delta < -dead_band {
            AxisAction::Decrease
        } else {
            AxisAction::Keep
        }
    }

    fn phrase(self, axis: &str) -> String {
        match self {
            AxisAction::Increase => format!("increase {axis}"),
            AxisAction::Decrease => format!("decrease {axis}"),
            AxisAction::Keep => format!("keep {axis} unchanged"),
        }
    }
}

/// Per-axis adjustment request toward a target VAD point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VadDirective {
    valence: AxisAction,
    arousal: AxisAction,
    dominance: AxisAction,
    target: VadVector,
}

impl VadDirective {
    pub fn new(
        valence: AxisAction,
        arousal: AxisAction,
        dominance: AxisAction,
        target: VadVector,
    ) -> Result<Self, PromptError> {
        if [valence, arousal, dominance]
            .iter()
            .all(|a| *a == AxisAction::Keep)
        {
            return Err(PromptError::AllKeep);
        }
        Ok(Self {
            valence,
            arousal,
            dominance,
            target,
        })
    }

    /// Derives actions axis by axis; `Err(AllKeep)` when every axis is within
    /// the dead-band.
    pub fn derive(
        current: &VadVector,
        target: &VadVector,
        dead_band: f64,
    ) -> Result<Self, PromptError> {
        let c = current.components();
        let t = target.components();
        Self::new(
            AxisAction::toward(c[0], t[0], dead_band),
            AxisAction::toward(c[1], t[1], dead_band),
            AxisAction::toward(c[2], t[2], dead_band),
            *target,
        )
    }

    pub fn actions(&self) -> [AxisAction; 3] {
        [self.valence, self.arousal, self.dominance]
    }

    pub fn target(&self) -> VadVector {
        self.target
    }

    /// Lookup key for few-shot exemplars, e.g. `v+a-d=`.
    pub fn signature(&self) -> String {
        format!(
            "v{}a{}d{}",
            self.valence.symbol(),
            self.arousal.symbol(),
            self.dominance.symbol()
        )
    }

    pub fn instructions(&self) -> [String; 3] {
        [
            self.valence.phrase("valence"),
            self.arousal.phrase("arousal"),
            self.dominance.phrase("dominance"),
        ]
    }
}

/// Few-shot example pairs keyed by directive signature, with a `default` fallback.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExemplarStore {
    pairs: BTreeMap<String, Vec<(String, String)>>,
}

impl Default for ExemplarStore {
    fn default() -> Self {
        Self::from_json_str(BUNDLED_EXEMPLARS).expect("bundled exemplars are valid")
    }
}

impl ExemplarStore {
    pub fn from_json_str(json: &str) -> Result<Self, PromptError> {
        let pairs: BTreeMap<String, Vec<(String, String)>> = serde_json::from_str(json)?;
        for (key, list) in &pairs {
            validate_pairs(key, list)?;
        }
        Ok(Self { pairs })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PromptError> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn for_directive(&self, directive: &VadDirective) -> &[(String, String)] {
        self.pairs
            .get(&directive.signature())
            .or_else(|| self.pairs.get("default"))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }
}

/// Few-shot prompt asking for a per-axis emotional adjustment of `text`.
pub fn build_vad_target_prompt(
    text: &str,
    current: &VadVector,
    directive: &VadDirective,
    exemplars: &ExemplarStore,
    k: usize,
) -> Result<RenderedPrompt, PromptError> {
    let text = text.trim();
    if text.is_empty() {
        return Err(PromptError::EmptyText);
    }
    let [v, a, d] = directive.instructions();
    let target = directive.target();
    let system = "You are a rewriting module that adjusts the emotional tone of text in valence-arousal-dominance space \
         (valence: positive or negative polarity; arousal: intensity; dominance: sense of control). \
         Adjust the tone as instructed while maintaining the original meaning and factual information."
        .to_string();
    let mut user = format!(
        "Instructions: {v}, {a}, and {d}.\n\
         Current VAD: ({:.2}, {:.2}, {:.2}). Target VAD: ({:.2}, {:.2}, {:.2}).\n\
         Maintain the original meaning and factual information. Reply with the rewritten text only.\n",
        current.valence(),
        current.arousal(),
        current.dominance(),
        target.valence(),
        target.arousal(),
        target.dominance(),
    );
    let examples = exemplars.for_directive(directive);
    if !examples.is_empty() && k > 0 {
        user.push_str("\nExamples:\n");
        for (input, output) in examples.iter().take(k) {
            user.push_str(&format!("Input: {input}\nOutput: {output}\n"));
        }
    }
    user.push_str(&format!("\nText:\n\"\"\"\n{text}\n\"\"\""));
    Ok(RenderedPrompt { system, user })
}
