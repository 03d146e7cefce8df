//! JSONL record store with a checkpoint manifest, and the batch runner.
//!
//! Layout of a run directory:
//!
//! ```text
//! <dir>/records.jsonl   one RewriteRecord per line, corpus order
//! <dir>/manifest.json   last committed batch, committed byte length, config hash
//! ```
//!
//! A batch is committed by appending its lines, syncing, then atomically
//! replacing the manifest. Bytes past the committed length are discarded on
//! resume.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};

use super::{Engine, PipelineError, RecordStatus, RewriteRecord};
use crate::ingest::SourceRecord;
use crate::vad_space::VadPrototypeTable;

pub const DEFAULT_BATCH_SIZE: usize = 100;
const RECORDS_FILE: &str = "records.jsonl";
const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub run_id: String,
    pub config_hash: String,
    /// Zero-based index of the last committed batch; `None` before the first.
    pub last_committed_batch: Option<u64>,
    pub batch_size: u64,
    pub records_committed: u64,
    pub committed_bytes: u64,
    pub complete: bool,
    /// Prototype table the drifts were computed with, as `{"anger": [v,a,d], ...}`.
    pub prototypes: serde_json::Value,
}

impl Manifest {
    pub fn prototype_table(&self) -> Result<VadPrototypeTable, PipelineError> {
        VadPrototypeTable::from_json_str(&self.prototypes.to_string())
            .map_err(|e| PipelineError::StoreFormat(format!("manifest prototypes: {e}")))
    }
}

#[derive(Debug, Clone)]
pub struct RecordStore {
    dir: PathBuf,
}

impl RecordStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn records_path(&self) -> PathBuf {
        self.dir.join(RECORDS_FILE)
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.dir.join(MANIFEST_FILE)
    }

    pub fn exists(&self) -> bool {
        self.manifest_path().exists()
    }

    pub fn manifest(&self) -> Result<Manifest, PipelineError> {
        let bytes = std::fs::read(self.manifest_path())?;
        serde_json::from_slice(&bytes)
            .map_err(|e| PipelineError::StoreFormat(format!("manifest: {e}")))
    }

    fn write_manifest(&self, manifest: &Manifest) -> Result<(), PipelineError> {
        let tmp = self.dir.join(format!("{MANIFEST_FILE}.tmp"));
        let mut body = serde_json::to_vec_pretty(manifest).expect("manifest serializes");
        body.push(b'\n');
        let mut f = File::create(&tmp)?;
        f.write_all(&body)?;
        f.sync_all()?;
        std::fs::rename(&tmp, self.manifest_path())?;
        Ok(())
    }

    /// Committed records, in order. Anything past the committed length is ignored.
    pub fn records(&self) -> Result<Vec<RewriteRecord>, PipelineError> {
        let manifest = self.manifest()?;
        let file = File::open(self.records_path())?;
        let reader = BufReader::new(file.take(manifest.committed_bytes));
        let mut out = Vec::with_capacity(manifest.records_committed as usize);
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let rec = serde_json::from_str(&line)
                .map_err(|e| PipelineError::StoreFormat(format!("line {}: {e}", i + 1)))?;
            out.push(rec);
        }
        if out.len() as u64 != manifest.records_committed {
            return Err(PipelineError::StoreFormat(format!(
                "manifest lists {} records, found {}",
                manifest.records_committed,
                out.len()
            )));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub run_id: String,
    pub batch_size: usize,
    /// Records processed concurrently within a batch.
    pub parallelism: usize,
    pub limit: Option<usize>,
    /// Stop (as if killed) after this many batches have been committed in
    /// this invocation.
    pub stop_after_batches: Option<usize>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            run_id: "run".into(),
            batch_size: DEFAULT_BATCH_SIZE,
            parallelism: crate::backends::http::DEFAULT_PARALLELISM,
            limit: None,
            stop_after_batches: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RunSummary {
    /// Records processed by this invocation.
    pub processed: u64,
    /// Records already committed by an earlier invocation.
    pub resumed_from: u64,
    pub batches: u64,
    pub complete_records: u64,
    pub pending_records: u64,
    pub failed_records: u64,
    pub interrupted: bool,
}

/// Processes `corpus` into the store at `store`, resuming if a manifest exists.
///
/// Backend failures are recorded on the records; only storage failures abort.
pub async fn run_dataset(
    engine: &Engine,
    corpus: &[SourceRecord],
    store: &RecordStore,
    options: &RunOptions,
) -> Result<RunSummary, PipelineError> {
    let batch_size = options.batch_size.max(1);
    let corpus = &corpus[..options.limit.unwrap_or(corpus.len()).min(corpus.len())];

    let mut manifest = if store.exists() {
        let m = store.manifest()?;
        if m.config_hash != engine.config_hash {
            return Err(PipelineError::ConfigMismatch {
                path: store.dir().display().to_string(),
                expected: engine.config_hash.clone(),
                found: m.config_hash,
            });
        }
        if m.batch_size != batch_size as u64 {
            return Err(PipelineError::StoreFormat(format!(
                "store was written with batch size {}, not {batch_size}",
                m.batch_size
            )));
        }
        // drop any uncommitted tail left by an interrupted batch
        let f = OpenOptions::new().write(true).open(store.records_path())?;
        f.set_len(m.committed_bytes)?;
        f.sync_all()?;
        m
    } else {
        std::fs::create_dir_all(store.dir())?;
        File::create(store.records_path())?;
        let m = Manifest {
            run_id: options.run_id.clone(),
            config_hash: engine.config_hash.clone(),
            last_committed_batch: None,
            batch_size: batch_size as u64,
            records_committed: 0,
            committed_bytes: 0,
            complete: false,
            prototypes: serde_json::from_str(&engine.prototypes.to_json_string())
                .expect("prototype json is valid"),
        };
        store.write_manifest(&m)?;
        m
    };

    let start = manifest.records_committed as usize;
    let mut summary = RunSummary {
        resumed_from: manifest.records_committed,
        ..RunSummary::default()
    };
    if start > 0 {
        log::info!(
            "resuming {} after {start} committed records",
            manifest.run_id
        );
    }

    let mut records_file = OpenOptions::new().append(true).open(store.records_path())?;
    for batch in corpus.get(start..).unwrap_or(&[]).chunks(batch_size) {
        let results: Vec<RewriteRecord> = stream::iter(batch)
            .map(|rec| engine.process_record(rec))
            .buffered(options.parallelism.max(1))
            .collect()
            .await;

        let mut buf = Vec::new();
        for rec in &results {
            serde_json::to_writer(&mut buf, rec).expect("records serialize");
            buf.push(b'\n');
            match rec.status {
                RecordStatus::Complete => summary.complete_records += 1,
                RecordStatus::Pending => summary.pending_records += 1,
                RecordStatus::Failed => summary.failed_records += 1,
            }
        }
        records_file.write_all(&buf)?;
        records_file.sync_data()?;

        manifest.last_committed_batch = Some(manifest.last_committed_batch.map_or(0, |b| b + 1));
        manifest.records_committed += results.len() as u64;
        manifest.committed_bytes += buf.len() as u64;
        manifest.complete = manifest.records_committed as usize >= corpus.len();
        store.write_manifest(&manifest)?;

        summary.processed += results.len() as u64;
        summary.batches += 1;
        log::info!(
            "committed batch {} ({} records total)",
            manifest.last_committed_batch.unwrap_or(0),
            manifest.records_committed
        );
        if options
            .stop_after_batches
            .is_some_and(|n| summary.batches as usize >= n)
            && !manifest.complete
        {
            summary.interrupted = true;
            return Ok(summary);
        }
    }

    if !manifest.complete && manifest.records_committed as usize >= corpus.len() {
        manifest.complete = true;
        store.write_manifest(&manifest)?;
    }
    Ok(summary)
}
