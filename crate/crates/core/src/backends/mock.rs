//! Deterministic offline backends.
//!
//! The classifier scores keyword hits from a bundled lexicon. The rewriter
//! detects the requested style (or a VAD directive) in the prompt, pulls the
//! quoted text out of it, prefixes a style marker and applies a fixed word
//! substitution table. Both are pure functions of their input.

use std::collections::{BTreeMap, HashMap};

use async_trait::async_trait;
use serde::Deserialize;

use super::{BackendError, ClassifierBackend, RewriterBackend};
use crate::emotion_mapping::{FineLabel, LabelScores};
use crate::prompts::{RenderedPrompt, Style};

const LEXICON: &str = include_str!("../../assets/mock_lexicon.json");
const REWRITES: &str = include_str!("../../assets/mock_rewrites.json");

pub const MOCK_MODEL_ID: &str = "mock";

fn words(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
}

#[derive(Debug, Clone)]
pub struct MockClassifier {
    lexicon: HashMap<String, (FineLabel, f64)>,
}

impl Default for MockClassifier {
    fn default() -> Self {
        let raw: BTreeMap<String, (String, f64)> =
            serde_json::from_str(LEXICON).expect("bundled lexicon parses");
        let lexicon = raw
            .into_iter()
            .map(|(word, (label, score))| {
                let label = label.parse().expect("bundled lexicon uses known labels");
                (word, (label, score))
            })
            .collect();
        Self { lexicon }
    }
}

impl MockClassifier {
    pub fn new() -> Self {
        Self::default()
    }

    /// Per label, the highest score among matching words. Texts without a
    /// hit score `{neutral: 0.9, curiosity: 0.1}`.
    pub fn scores(&self, text: &str) -> Result<LabelScores, BackendError> {
        if text.trim().is_empty() {
            return Err(BackendError::EmptyText);
        }
        let mut scores: BTreeMap<FineLabel, f64> = BTreeMap::new();
        for word in words(text) {
            if let Some((label, score)) = self.lexicon.get(&word) {
                let slot = scores.entry(*label).or_insert(0.0);
                *slot = slot.max(*score);
            }
        }
        if scores.is_empty() {
            scores.insert(FineLabel::Neutral, 0.9);
            scores.insert(FineLabel::Curiosity, 0.1);
        }
        Ok(LabelScores::new(scores)?)
    }
}

#[async_trait]
impl ClassifierBackend for MockClassifier {
    fn model_id(&self) -> &str {
        MOCK_MODEL_ID
    }

    async fn classify(&self, text: &str) -> Result<LabelScores, BackendError> {
        self.scores(text)
    }
}

#[derive(Debug, Clone, Deserialize)]
struct RewriteRule {
    marker: String,
    substitutions: HashMap<String, String>,
}

#[derive(Debug, Clone)]
pub struct MockRewriter {
    rules: HashMap<String, RewriteRule>,
}

impl Default for MockRewriter {
    fn default() -> Self {
        Self {
            rules: serde_json::from_str(REWRITES).expect("bundled rewrite rules parse"),
        }
    }
}

impl MockRewriter {
    pub fn new() -> Self {
        Self::default()
    }

    /// Which rule a prompt selects: `adjust` for VAD directives, the style name
    /// when a "<style> tone" request is present, `plain` otherwise.
    pub fn detect_rule(prompt: &RenderedPrompt) -> &'static str {
        let user = prompt.user.to_lowercase();
        if [
            "increase valence",
            "decrease valence",
            "increase arousal",
            "decrease arousal",
            "increase dominance",
            "decrease dominance",
        ]
        .iter()
        .any(|p| user.contains(p))
        {
            return "adjust";
        }
        Style::ALL
            .iter()
            .find(|s| user.contains(&format!("{} tone", s.as_str())))
            .map(|s| s.as_str())
            .unwrap_or("plain")
    }

    /// Text between the last pair of triple-quote fences, or the whole user message.
    pub fn extract_text(prompt: &RenderedPrompt) -> &str {
        let user = prompt.user.as_str();
        if let Some(end) = user.rfind("\n\"\"\"") {
            if let Some(start) = user[..end].rfind("\"\"\"\n") {
                return &user[start + 4..end];
            }
        }
        user.trim()
    }

    pub fn transform(&self, prompt: &RenderedPrompt) -> String {
        let rule = &self.rules[Self::detect_rule(prompt)];
        let text = Self::extract_text(prompt);
        let mut out = String::with_capacity(text.len() + rule.marker.len() + 1);
        out.push_str(&rule.marker);
        out.push(' ');
        let mut word = String::new();
        let flush = |word: &mut String, out: &mut String| {
            if !word.is_empty() {
                match rule.substitutions.get(&word.to_lowercase()) {
                    Some(rep) => out.push_str(rep),
                    None => out.push_str(word),
                }
                word.clear();
            }
        };
        for c in text.chars() {
            if c.is_alphanumeric() {
                word.push(c);
            } else {
                flush(&mut word, &mut out);
                out.push(c);
            }
        }
        flush(&mut word, &mut out);
        out
    }
}

#[async_trait]
impl RewriterBackend for MockRewriter {
    fn model_id(&self) -> &str {
        MOCK_MODEL_ID
    }

    async fn rewrite(&self, prompt: &RenderedPrompt) -> Result<String, BackendError> {
        Ok(self.transform(prompt))
    }
}
