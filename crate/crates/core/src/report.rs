//! Renders dataset aggregates as tables (Markdown/CSV) and transition data
//! (CSV/JSON). Renderers are pure views over a [`ReportBundle`].

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::Source;
use crate::pipeline::{aggregate, PipelineError, RewriteRecord, StyleReport};
use crate::prompts::Style;
use crate::vad_space::{CoreEmotion, VadPrototypeTable};

pub const TABLE2_COLUMNS: [&str; 8] = [
    "Dataset",
    "Style",
    "Total",
    "Preserved",
    "Changed",
    "Preserved (%)",
    "Changed (%)",
    "EDI_s",
];

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("no records to report on")]
    EmptyDataset,
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetReport {
    pub dataset: Source,
    pub styles: Vec<StyleReport>,
    /// Original-text emotion counts in canonical order.
    pub distribution: [u64; CoreEmotion::COUNT],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub run_id: String,
    pub config_hash: String,
    pub datasets: Vec<DatasetReport>,
}

/// Display order of datasets in tables.
fn dataset_rank(s: Source) -> u8 {
    match s {
        Source::Hatexplain => 0,
        Source::ToxicComment => 1,
        Source::Generic => 2,
    }
}

/// Original-emotion counts per dataset.
pub fn emotion_distribution(
    records: &[RewriteRecord],
) -> Result<BTreeMap<Source, [u64; CoreEmotion::COUNT]>, ReportError> {
    let mut out: BTreeMap<Source, [u64; CoreEmotion::COUNT]> = BTreeMap::new();
    for rec in records {
        if let Some(original) = rec.original {
            out.entry(rec.source).or_default()[original.emotion.index()] += 1;
        }
    }
    if out.is_empty() {
        return Err(ReportError::EmptyDataset);
    }
    Ok(out)
}

impl ReportBundle {
    /// Aggregates every (dataset, style) pair that has at least one complete record.
    pub fn from_records(
        records: &[RewriteRecord],
        table: &VadPrototypeTable,
        run_id: impl Into<String>,
        config_hash: impl Into<String>,
    ) -> Result<Self, ReportError> {
        let distribution = emotion_distribution(records)?;
        let mut datasets: Vec<Source> = distribution.keys().copied().collect();
        datasets.sort_by_key(|s| dataset_rank(*s));
        let mut out = Vec::new();
        for dataset in datasets {
            let subset: Vec<&RewriteRecord> =
                records.iter().filter(|r| r.source == dataset).collect();
            let mut styles = Vec::new();
            for style in Style::ALL {
                match aggregate(subset.iter().copied(), style, table) {
                    Ok(r) => styles.push(r),
                    Err(PipelineError::EmptyDataset) => {}
                    Err(e) => return Err(e.into()),
                }
            }
            out.push(DatasetReport {
                dataset,
                styles,
                distribution: distribution[&dataset],
            });
        }
        Ok(Self {
            run_id: run_id.into(),
            config_hash: config_hash.into(),
            datasets: out,
        })
    }

    fn rows(&self) -> impl Iterator<Item = (Source, &StyleReport)> {
        self.datasets
            .iter()
            .flat_map(|d| d.styles.iter().map(move |s| (d.dataset, s)))
    }
}

fn table2_cells(dataset: Source, r: &StyleReport) -> [String; 8] {
    [
        dataset.display_name().to_string(),
        r.style.title().to_string(),
        r.total.to_string(),
        r.preserved.to_string(),
        r.changed.to_string(),
        format!("{:.2}", r.preserved_pct),
        format!("{:.2}", r.changed_pct),
        format!("{:.6}", r.edi),
    ]
}

/// Preservation/change/EDI table as `(markdown, csv)`.
pub fn render_table2(bundle: &ReportBundle) -> Result<(String, String), ReportError> {
    let mut md = format!("| {} |\n", TABLE2_COLUMNS.join(" | "));
    md.push_str(&format!("|{}\n", "---|".repeat(TABLE2_COLUMNS.len())));
    let mut csv_out = csv::Writer::from_writer(Vec::new());
    csv_out.write_record(TABLE2_COLUMNS)?;
    for (dataset, r) in bundle.rows() {
        let cells = table2_cells(dataset, r);
        md.push_str(&format!("| {} |\n", cells.join(" | ")));
        csv_out.write_record(&cells)?;
    }
    md.push_str(&format!(
        "\nrun `{}`, config `{}`\n",
        bundle.run_id, bundle.config_hash
    ));
    let csv_bytes = csv_out.into_inner().map_err(|e| e.into_error())?;
    Ok((
        md,
        String::from_utf8(csv_bytes).expect("csv output is utf-8"),
    ))
}

/// One parsed row of the table CSV.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct Table2Row {
    #[serde(rename = "Dataset")]
    pub dataset: String,
    #[serde(rename = "Style")]
    pub style: String,
    #[serde(rename = "Total")]
    pub total: u64,
    #[serde(rename = "Preserved")]
    pub preserved: u64,
    #[serde(rename = "Changed")]
    pub changed: u64,
    #[serde(rename = "Preserved (%)")]
    pub preserved_pct: f64,
    #[serde(rename = "Changed (%)")]
    pub changed_pct: f64,
    #[serde(rename = "EDI_s")]
    pub edi: f64,
}

pub fn parse_table2_csv(text: &str) -> Result<Vec<Table2Row>, ReportError> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect::<Result<_, _>>()
        .map_err(Into::into)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionJson {
    pub dataset: Source,
    pub style: Style,
    pub emotions: Vec<CoreEmotion>,
    pub counts: Vec<Vec<u64>>,
    /// Each row divided by its sum; all-zero rows stay zero.
    pub proportions: Vec<Vec<f64>>,
}

/// Transition counts as `(csv, json)`; rows are original emotions, columns rewritten.
pub fn render_transition_matrix(
    dataset: Source,
    report: &StyleReport,
) -> Result<(String, String), ReportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["original\\rewritten".to_string()];
    header.extend(CoreEmotion::ALL.iter().map(|e| e.as_str().to_string()));
    w.write_record(&header)?;
    for from in CoreEmotion::ALL {
        let mut row = vec![from.as_str().to_string()];
        row.extend(report.transition[from.index()].iter().map(u64::to_string));
        w.write_record(&row)?;
    }
    let csv_bytes = w.into_inner().map_err(|e| e.into_error())?;

    let counts: Vec<Vec<u64>> = report.transition.iter().map(|r| r.to_vec()).collect();
    let proportions = counts
        .iter()
        .map(|row| {
            let sum: u64 = row.iter().sum();
            row.iter()
                .map(|c| {
                    if sum == 0 {
                        0.0
                    } else {
                        *c as f64 / sum as f64
                    }
                })
                .collect()
        })
        .collect();
    let json = TransitionJson {
        dataset,
        style: report.style,
        emotions: CoreEmotion::ALL.to_vec(),
        counts,
        proportions,
    };
    Ok((
        String::from_utf8(csv_bytes).expect("csv output is utf-8"),
        serde_json::to_string_pretty(&json).expect("transition json serializes") + "\n",
    ))
}

/// Original emotion counts per dataset as CSV.
pub fn render_emotion_distribution(bundle: &ReportBundle) -> Result<String, ReportError> {
    if bundle.datasets.is_empty() {
        return Err(ReportError::EmptyDataset);
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["Dataset", "Emotion", "Count"])?;
    for d in &bundle.datasets {
        for e in CoreEmotion::ALL {
            w.write_record([
                d.dataset.display_name(),
                e.as_str(),
                &d.distribution[e.index()].to_string(),
            ])?;
        }
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Per-style share of changed emotions as CSV.
pub fn render_change_rates(bundle: &ReportBundle) -> Result<String, ReportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["Dataset", "Style", "Changed (%)"])?;
    for (dataset, r) in bundle.rows() {
        w.write_record([
            dataset.display_name(),
            r.style.title(),
            &format!("{:.2}", r.changed_pct),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Writes every rendering under `<out>/<run_id>/` and returns the paths written.
pub fn write_reports(
    bundle: &ReportBundle,
    out: impl AsRef<Path>,
) -> Result<Vec<PathBuf>, ReportError> {
    let dir = out.as_ref().join(&bundle.run_id);
    std::fs::create_dir_all(&dir)?;
    let mut written = Vec::new();
    let mut put = |name: String, body: String| -> Result<(), ReportError> {
        let path = dir.join(name);
        std::fs::write(&path, body)?;
        written.push(path);
        Ok(())
    };
    let (md, csv_text) = render_table2(bundle)?;
    put("table2.md".into(), md)?;
    put("table2.csv".into(), csv_text)?;
    for d in &bundle.datasets {
        for r in &d.styles {
            let (csv_text, json) = render_transition_matrix(d.dataset, r)?;
            let stem = format!("transitions_{}_{}", d.dataset.as_str(), r.style.as_str());
            put(format!("{stem}.csv"), csv_text)?;
            put(format!("{stem}.json"), json)?;
        }
    }
    put(
        "distribution.csv".into(),
        render_emotion_distribution(bundle)?,
    )?;
    put("change_rates.csv".into(), render_change_rates(bundle)?)?;
    Ok(written)
}
