//! Corpus parsing, harm filtering and canonical JSONL output.
//!
//! Supported inputs are the Kaggle Toxic Comment `train.csv`, the HateXplain
//! `dataset.json` and a generic JSONL of `{"id", "text"}` objects. All of them
//! normalize to [`SourceRecord`].

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const TOXIC_LABELS: [&str; 6] = [
    "toxic",
    "severe_toxic",
    "obscene",
    "threat",
    "insult",
    "identity_hate",
];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("malformed CSV at row {row}: {reason}")]
    MalformedCsv { row: u64, reason: String },
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("malformed JSON: {0}")]
    MalformedJson(String),
    #[error("record `{id}` is missing field `{field}`")]
    MissingField { id: String, field: &'static str },
    #[error("record `{0}` has empty text")]
    EmptyText(String),
    #[error("duplicate record id `{0}`")]
    DuplicateId(String),
    #[error("unknown source `{0}`")]
    UnknownSource(String),
    #[error("unknown filter policy `{0}`")]
    UnknownPolicy(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl IngestError {
    /// Whether the error concerns a single record (counted and skipped) rather
    /// than the whole input.
    pub fn is_record_level(&self) -> bool {
        matches!(
            self,
            IngestError::MalformedCsv { .. }
                | IngestError::MissingField { .. }
                | IngestError::EmptyText(_)
                | IngestError::DuplicateId(_)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    ToxicComment,
    Hatexplain,
    Generic,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::ToxicComment => "toxic_comment",
            Source::Hatexplain => "hatexplain",
            Source::Generic => "generic",
        }
    }

    /// Dataset name as printed in report tables.
    pub fn display_name(self) -> &'static str {
        match self {
            Source::ToxicComment => "Toxic comment",
            Source::Hatexplain => "HateXplain",
            Source::Generic => "Generic",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Source {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "toxic_comment" | "toxic-comment" => Ok(Source::ToxicComment),
            "hatexplain" => Ok(Source::Hatexplain),
            "generic" | "jsonl" => Ok(Source::Generic),
            other => Err(IngestError::UnknownSource(other.to_string())),
        }
    }
}

/// Canonical corpus record. `harm_labels` serializes as a sorted array.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceRecord {
    pub id: String,
    pub text: String,
    pub source: Source,
    #[serde(default)]
    pub harm_labels: BTreeSet<String>,
}

impl SourceRecord {
    fn checked(self) -> Result<Self, IngestError> {
        if self.text.trim().is_empty() {
            Err(IngestError::EmptyText(self.id))
        } else {
            Ok(self)
        }
    }
}

pub type RecordResult = Result<SourceRecord, IngestError>;

/// Streams records from a Toxic Comment CSV. Quoted fields may span lines.
pub fn parse_toxic_comment_csv(
    path: impl AsRef<Path>,
) -> Result<impl Iterator<Item = RecordResult>, IngestError> {
    toxic_comment_reader(File::open(path)?)
}

pub fn toxic_comment_reader<R: std::io::Read>(
    input: R,
) -> Result<impl Iterator<Item = RecordResult>, IngestError> {
    let mut reader = csv::ReaderBuilder::new().flexible(false).from_reader(input);
    let headers = reader
        .headers()
        .map_err(|e| IngestError::MalformedCsv {
            row: 0,
            reason: e.to_string(),
        })?
        .clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| IngestError::MissingColumn(name.to_string()))
    };
    let id_col = column("id")?;
    let text_col = column("comment_text")?;
    let label_cols = TOXIC_LABELS
        .iter()
        .map(|l| column(l).map(|i| (*l, i)))
        .collect::<Result<Vec<_>, _>>()?;

    Ok(reader.into_records().enumerate().map(move |(i, row)| {
        let row_no = i as u64 + 1;
        let row = row.map_err(|e| IngestError::MalformedCsv {
            row: row_no,
            reason: e.to_string(),
        })?;
        let field = |idx: usize| row.get(idx).unwrap_or("");
        let mut harm_labels = BTreeSet::new();
        for (label, idx) in &label_cols {
            match field(*idx).trim() {
                "1" => {
                    harm_labels.insert(label.to_string());
                }
                "0" => {}
                other => {
                    return Err(IngestError::MalformedCsv {
                        row: row_no,
                        reason: format!("`{label}` must be 0 or 1, got `{other}`"),
                    })
                }
            }
        }
        SourceRecord {
            id: field(id_col).to_string(),
            text: field(text_col).to_string(),
            source: Source::ToxicComment,
            harm_labels,
        }
        .checked()
    }))
}

#[derive(Debug, Deserialize)]
struct HatexplainPost {
    post_id: Option<String>,
    annotators: Option<Vec<HatexplainAnnotator>>,
    post_tokens: Option<Vec<String>>,
}

#[derive(Debug, Deserialize)]
struct HatexplainAnnotator {
    label: String,
}

/// Label with a strict plurality among annotators, else `undecided`.
pub fn majority_label<'a>(labels: impl IntoIterator<Item = &'a str>) -> String {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for l in labels {
        *counts.entry(l).or_default() += 1;
    }
    let max = counts.values().copied().max().unwrap_or(0);
    let mut winners = counts.iter().filter(|(_, c)| **c == max);
    match (winners.next(), winners.next()) {
        (Some((label, _)), None) => label.to_string(),
        _ => "undecided".to_string(),
    }
}

/// Parses a HateXplain `dataset.json` (an object keyed by post id), keeping
/// file order. Tokens are joined with single spaces.
pub fn parse_hatexplain_json(path: impl AsRef<Path>) -> Result<Vec<RecordResult>, IngestError> {
    hatexplain_from_str(&std::fs::read_to_string(path)?)
}

pub fn hatexplain_from_str(json: &str) -> Result<Vec<RecordResult>, IngestError> {
    let posts: serde_json::Map<String, serde_json::Value> =
        serde_json::from_str(json).map_err(|e| IngestError::MalformedJson(e.to_string()))?;
    Ok(posts
        .into_iter()
        .map(|(key, value)| {
            let post: HatexplainPost = serde_json::from_value(value)
                .map_err(|e| IngestError::MalformedJson(format!("post `{key}`: {e}")))?;
            let id = post.post_id.unwrap_or(key);
            let tokens = post.post_tokens.ok_or_else(|| IngestError::MissingField {
                id: id.clone(),
                field: "post_tokens",
            })?;
            let annotators = post.annotators.ok_or_else(|| IngestError::MissingField {
                id: id.clone(),
                field: "annotators",
            })?;
            let label = majority_label(annotators.iter().map(|a| a.label.as_str()));
            SourceRecord {
                id,
                text: tokens.join(" "),
                source: Source::Hatexplain,
                harm_labels: BTreeSet::from([label]),
            }
            .checked()
        })
        .collect())
}

#[derive(Debug, Deserialize)]
struct GenericLine {
    id: Option<serde_json::Value>,
    text: Option<String>,
    #[serde(default)]
    harm_labels: BTreeSet<String>,
    source: Option<Source>,
}

/// Streams a JSONL file of `{"id", "text"}` objects. Canonical JSONL written
/// by [`normalize`] is accepted too and keeps its recorded source.
pub fn parse_generic_jsonl(
    path: impl AsRef<Path>,
) -> Result<impl Iterator<Item = RecordResult>, IngestError> {
    Ok(generic_jsonl_reader(BufReader::new(File::open(path)?)))
}

pub fn generic_jsonl_reader<R: BufRead>(input: R) -> impl Iterator<Item = RecordResult> {
    input
        .lines()
        .enumerate()
        .filter(|(_, line)| !matches!(line, Ok(l) if l.trim().is_empty()))
        .map(|(i, line)| {
            let line = line?;
            let parsed: GenericLine = serde_json::from_str(&line)
                .map_err(|e| IngestError::MalformedJson(format!("line {}: {e}", i + 1)))?;
            let id = match parsed.id {
                Some(serde_json::Value::String(s)) => s,
                Some(serde_json::Value::Number(n)) => n.to_string(),
                _ => {
                    return Err(IngestError::MissingField {
                        id: format!("line {}", i + 1),
                        field: "id",
                    })
                }
            };
            let text = parsed.text.ok_or_else(|| IngestError::MissingField {
                id: id.clone(),
                field: "text",
            })?;
            SourceRecord {
                id,
                text,
                source: parsed.source.unwrap_or(Source::Generic),
                harm_labels: parsed.harm_labels,
            }
            .checked()
        })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterPolicy {
    /// Toxic Comment rows with any label set, HateXplain posts labeled
    /// `hatespeech` or `offensive`, and every generic record.
    #[default]
    Default,
    None,
}

impl FromStr for FilterPolicy {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "default" => Ok(FilterPolicy::Default),
            "none" => Ok(FilterPolicy::None),
            other => Err(IngestError::UnknownPolicy(other.to_string())),
        }
    }
}

impl FilterPolicy {
    pub fn keeps(self, record: &SourceRecord) -> bool {
        match self {
            FilterPolicy::None => true,
            FilterPolicy::Default => match record.source {
                Source::ToxicComment => !record.harm_labels.is_empty(),
                Source::Hatexplain => record
                    .harm_labels
                    .iter()
                    .any(|l| l == "hatespeech" || l == "offensive"),
                Source::Generic => true,
            },
        }
    }
}

pub fn filter_harmful<I>(records: I, policy: FilterPolicy) -> impl Iterator<Item = SourceRecord>
where
    I: IntoIterator<Item = SourceRecord>,
{
    records.into_iter().filter(move |r| policy.keeps(r))
}

/// Counts for one normalization pass: `read = kept + dropped + errored`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct IngestStats {
    pub read: u64,
    pub kept: u64,
    pub dropped: u64,
    pub errored: u64,
}

/// Filters and writes records as canonical JSONL in input order.
///
/// Record-level errors (bad rows, empty texts, duplicate ids) are logged and
/// counted; I/O and schema errors abort.
pub fn normalize<I, W>(
    records: I,
    policy: FilterPolicy,
    mut out: W,
) -> Result<IngestStats, IngestError>
where
    I: IntoIterator<Item = RecordResult>,
    W: Write,
{
    let mut stats = IngestStats::default();
    let mut seen = HashSet::new();
    for item in records {
        stats.read += 1;
        let record = match item.and_then(|r| {
            if seen.insert(r.id.clone()) {
                Ok(r)
            } else {
                Err(IngestError::DuplicateId(r.id))
            }
        }) {
            Ok(r) => r,
            Err(e) if e.is_record_level() => {
                log::warn!("skipping record: {e}");
                stats.errored += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        if !policy.keeps(&record) {
            log::debug!(
                "dropping `{}`: not harmful under {policy:?} policy",
                record.id
            );
            stats.dropped += 1;
            continue;
        }
        serde_json::to_writer(&mut out, &record).expect("records serialize");
        out.write_all(b"\n")?;
        stats.kept += 1;
    }
    out.flush()?;
    Ok(stats)
}

/// Reads a canonical (or generic) JSONL corpus, failing on the first bad line.
pub fn read_corpus(path: impl AsRef<Path>) -> Result<Vec<SourceRecord>, IngestError> {
    let mut seen = HashSet::new();
    parse_generic_jsonl(path)?
        .map(|r| {
            let r = r?;
            if !seen.insert(r.id.clone()) {
                return Err(IngestError::DuplicateId(r.id));
            }
            Ok(r)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "id,comment_text,toxic,severe_toxic,obscene,threat,insult,identity_hate\n";

    fn csv_records(body: &str) -> Vec<RecordResult> {
        toxic_comment_reader(format!("{HEADER}{body}").as_bytes())
            .unwrap()
            .collect()
    }

    #[test]
    fn toxic_labels_decoded() {
        let recs = csv_records("a1,you are awful,1,0,0,0,1,0\na2,nice day,0,0,0,0,0,0\n");
        let a1 = recs[0].as_ref().unwrap();
        assert_eq!(
            a1.harm_labels,
            BTreeSet::from(["toxic".to_string(), "insult".to_string()])
        );
        let a2 = recs[1].as_ref().unwrap();
        assert!(a2.harm_labels.is_empty());
        assert!(!FilterPolicy::Default.keeps(a2));
        assert!(FilterPolicy::None.keeps(a2));
    }

    #[test]
    fn quoted_multiline_field() {
        let recs = csv_records("m1,\"line one,\nline \"\"two\"\"\",1,0,0,0,0,0\n");
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].as_ref().unwrap().text, "line one,\nline \"two\"");
    }

    #[test]
    fn missing_column_and_bad_value() {
        let err = toxic_comment_reader("id,comment_text,toxic\n1,x,1\n".as_bytes())
            .err()
            .unwrap();
        assert!(matches!(err, IngestError::MissingColumn(c) if c == "severe_toxic"));
        let recs = csv_records("b1,text,2,0,0,0,0,0\n");
        assert!(matches!(
            recs[0],
            Err(IngestError::MalformedCsv { row: 1, .. })
        ));
        let recs = csv_records("b2,text,1,0\n");
        assert!(matches!(
            recs[0],
            Err(IngestError::MalformedCsv { row: 1, .. })
        ));
    }

    #[test]
    fn majority_vote() {
        assert_eq!(
            majority_label(["offensive", "normal", "offensive"]),
            "offensive"
        );
        assert_eq!(
            majority_label(["hatespeech", "normal", "offensive"]),
            "undecided"
        );
        assert_eq!(majority_label(["normal", "normal", "normal"]), "normal");
    }

    #[test]
    fn hatexplain_parsing() {
        let json = r#"{
            "p2": {"post_id": "p2", "annotators": [{"label": "normal"}, {"label": "normal"}, {"label": "offensive"}], "post_tokens": ["have", "a", "nice", "day"]},
            "p1": {"post_id": "p1", "annotators": [{"label": "hatespeech"}, {"label": "hatespeech"}, {"label": "offensive"}], "post_tokens": ["you", "<user>", "are", "trash"]},
            "p3": {"post_id": "p3", "annotators": [{"label": "normal"}]}
        }"#;
        let recs = hatexplain_from_str(json).unwrap();
        let p2 = recs[0].as_ref().unwrap();
        assert_eq!(p2.id, "p2");
        assert_eq!(p2.text, "have a nice day");
        assert!(!FilterPolicy::Default.keeps(p2));
        let p1 = recs[1].as_ref().unwrap();
        assert_eq!(p1.text, "you <user> are trash");
        assert!(FilterPolicy::Default.keeps(p1));
        assert!(matches!(
            recs[2],
            Err(IngestError::MissingField {
                field: "post_tokens",
                ..
            })
        ));
        assert!(matches!(
            hatexplain_from_str("[1,2"),
            Err(IngestError::MalformedJson(_))
        ));
    }

    #[test]
    fn generic_passes_unfiltered() {
        let input = "{\"id\":\"g1\",\"text\":\"plain words\"}\n\n{\"id\":7,\"text\":\"more\"}\n";
        let recs: Vec<_> = generic_jsonl_reader(input.as_bytes())
            .collect::<Result<_, _>>()
            .unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[1].id, "7");
        assert!(recs.iter().all(|r| FilterPolicy::None.keeps(r)));
        assert_eq!(filter_harmful(recs, FilterPolicy::None).count(), 2);
    }

    #[test]
    fn normalize_accounts_for_every_record() {
        let recs = csv_records(
            "d1,bad,1,0,0,0,0,0\nd2,fine,0,0,0,0,0,0\nd1,dup,1,0,0,0,0,0\nd3,  ,1,0,0,0,0,0\n",
        );
        let mut out = Vec::new();
        let stats = normalize(recs, FilterPolicy::Default, &mut out).unwrap();
        assert_eq!(
            stats,
            IngestStats {
                read: 4,
                kept: 1,
                dropped: 1,
                errored: 2
            }
        );
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "{\"id\":\"d1\",\"text\":\"bad\",\"source\":\"toxic_comment\",\"harm_labels\":[\"toxic\"]}\n"
        );
    }
}
