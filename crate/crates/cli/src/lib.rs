//! Command-line driver: ingest, run, report, moderate and serve.

use std::fs::File;
use std::io::{BufWriter, Read};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use emodrift_core::ingest::{
    normalize, parse_generic_jsonl, parse_hatexplain_json, parse_toxic_comment_csv, read_corpus,
    FilterPolicy, IngestStats,
};
use emodrift_core::pipeline::{moderate, run_dataset, ModerationOutcome, RecordStore, RunOptions};
use emodrift_core::report::{write_reports, ReportBundle};
use emodrift_core::{Source, VadVector};

pub mod config;
pub mod gateway;

pub use config::{ConfigError, RunConfig, CONFIG_HASH_VERSION};

pub const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (config hash sha256-v1)");

/// Exit status of `moderate` when the text was rewritten.
pub const EXIT_MODERATED: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
/// Exit status of `moderate` when the text was not harmful.
pub const EXIT_BENIGN: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "emodrift", version = VERSION, about = "Measure emotion drift of stylistic rewrites")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct BackendArgs {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Use the deterministic offline backends regardless of the config.
    #[arg(long)]
    pub mock: bool,
}

impl BackendArgs {
    fn load(&self) -> anyhow::Result<RunConfig> {
        let mut config = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if self.mock {
            config.use_mocks();
        }
        Ok(config)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert a raw dataset into canonical JSONL.
    Ingest {
        /// toxic-comment, hatexplain or jsonl
        #[arg(long)]
        source: Source,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// default keeps harmful records only; none keeps everything
        #[arg(long, default_value = "default")]
        filter: FilterPolicy,
    },
    /// Classify, rewrite in every style and re-classify a corpus.
    Run {
        #[arg(long)]
        corpus: PathBuf,
        #[command(flatten)]
        backend: BackendArgs,
        /// Continue an interrupted run with this id.
        #[arg(long)]
        resume: Option<String>,
        #[arg(long)]
        limit: Option<usize>,
        /// Stop after committing this many batches, as if interrupted.
        #[arg(long, hide = true)]
        stop_after_batches: Option<usize>,
    },
    /// Aggregate a record store into tables.
    Report {
        /// Run directory containing manifest.json and records.jsonl.
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rewrite one harmful text toward the target emotion.
    Moderate {
        #[arg(long, conflicts_with = "stdin", required_unless_present = "stdin")]
        text: Option<String>,
        #[arg(long)]
        stdin: bool,
        /// Target as `v,a,d`.
        #[arg(long)]
        target: Option<VadVector>,
        #[arg(long)]
        refine: bool,
        /// Print the full outcome as JSON.
        #[arg(long)]
        json: bool,
        #[command(flatten)]
        backend: BackendArgs,
    },
    /// Serve the moderation gateway.
    Serve {
        #[command(flatten)]
        backend: BackendArgs,
        /// Overrides `gateway.bind`.
        #[arg(long)]
        bind: Option<String>,
    },
}

fn ingest(
    source: Source,
    input: &Path,
    output: &Path,
    filter: FilterPolicy,
) -> anyhow::Result<IngestStats> {
    let out = BufWriter::new(
        File::create(output).with_context(|| format!("creating {}", output.display()))?,
    );
    let stats = match source {
        Source::ToxicComment => normalize(parse_toxic_comment_csv(input)?, filter, out)?,
        Source::Hatexplain => normalize(parse_hatexplain_json(input)?, filter, out)?,
        Source::Generic => normalize(parse_generic_jsonl(input)?, filter, out)?,
    };
    Ok(stats)
}

/// `run-` plus 12 hex digits of sha256(config hash, corpus bytes).
pub fn default_run_id(config_hash: &str, corpus: &Path) -> anyhow::Result<String> {
    let mut h = Sha256::new();
    h.update(config_hash.as_bytes());
    h.update([0u8]);
    let mut f = File::open(corpus).with_context(|| format!("opening {}", corpus.display()))?;
    let mut buf = Vec::new();
    f.read_to_end(&mut buf)?;
    h.update(&buf);
    Ok(format!("run-{}", &hex::encode(h.finalize())[..12]))
}

async fn run(
    corpus_path: &Path,
    backend: &BackendArgs,
    resume: Option<String>,
    limit: Option<usize>,
    stop_after_batches: Option<usize>,
) -> anyhow::Result<()> {
    let config = backend.load()?;
    let engine = config.build_engine()?;
    let corpus = read_corpus(corpus_path)
        .with_context(|| format!("reading corpus {}", corpus_path.display()))?;
    let run_id = match (&resume, &config.run_id) {
        (Some(id), _) | (None, Some(id)) => id.clone(),
        (None, None) => default_run_id(&engine.config_hash, corpus_path)?,
    };
    let store = RecordStore::new(config.output_dir.join(&run_id));
    match (resume.is_some(), store.exists()) {
        (true, false) => bail!("no run `{run_id}` under {}", config.output_dir.display()),
        (false, true) => bail!(
            "run `{run_id}` already exists at {}; pass --resume {run_id} to continue it",
            store.dir().display()
        ),
        _ => {}
    }
    let options = RunOptions {
        run_id: run_id.clone(),
        batch_size: config.batch_size,
        parallelism: config.parallelism,
        limit,
        stop_after_batches,
    };
    let summary = run_dataset(&engine, &corpus, &store, &options).await?;
    println!("{}", store.dir().display());
    eprintln!("{}", serde_json::to_string(&summary)?);
    Ok(())
}

fn report(store_dir: &Path, out: &Path) -> anyhow::Result<()> {
    let store = RecordStore::new(store_dir);
    if !store.exists() {
        bail!("{} is not a record store", store_dir.display());
    }
    let manifest = store.manifest()?;
    if !manifest.complete {
        log::warn!(
            "run {} is incomplete ({} records committed)",
            manifest.run_id,
            manifest.records_committed
        );
    }
    let records = store.records()?;
    let bundle = ReportBundle::from_records(
        &records,
        &manifest.prototype_table()?,
        &manifest.run_id,
        &manifest.config_hash,
    )?;
    for path in write_reports(&bundle, out)? {
        println!("{}", path.display());
    }
    Ok(())
}

async fn moderate_cmd(
    text: Option<String>,
    stdin: bool,
    target: Option<VadVector>,
    refine: bool,
    json: bool,
    backend: &BackendArgs,
) -> anyhow::Result<i32> {
    let config = backend.load()?;
    let engine = config.build_engine()?;
    let text = match (text, stdin) {
        (Some(t), _) => t,
        (None, true) => {
            let mut buf = String::new();
            std::io::stdin().read_to_string(&mut buf)?;
            buf.trim_end_matches(['\n', '\r']).to_string()
        }
        (None, false) => bail!("pass --text or --stdin"),
    };
    let outcome = moderate(&engine, &text, target.as_ref(), refine || config.refine).await?;
    if json {
        println!("{}", serde_json::to_string_pretty(&outcome)?);
    }
    Ok(match outcome {
        ModerationOutcome::Moderated { text, .. } => {
            if !json {
                println!("{text}");
            }
            EXIT_MODERATED
        }
        ModerationOutcome::Benign { text, emotion } => {
            if !json {
                println!("{text}");
            }
            eprintln!("not harmful ({emotion}); returned unchanged");
            EXIT_BENIGN
        }
    })
}

async fn serve(backend: &BackendArgs, bind: Option<String>) -> anyhow::Result<()> {
    let config = backend.load()?;
    let engine = Arc::new(config.build_engine()?);
    let bind = bind.unwrap_or_else(|| config.gateway.bind.clone());
    let listener = tokio::net::TcpListener::bind(&bind)
        .await
        .with_context(|| format!("binding {bind}"))?;
    log::info!("listening on {}", listener.local_addr()?);
    eprintln!("listening on {}", listener.local_addr()?);
    let app = gateway::router(engine, config.gateway.max_concurrency, config.refine);
    gateway::serve(listener, app).await?;
    Ok(())
}

/// Runs a parsed command and returns the process exit status.
pub async fn execute(cli: Cli) -> anyhow::Result<i32> {
    match cli.command {
        Command::Ingest {
            source,
            input,
            output,
            filter,
        } => {
            let stats = ingest(source, &input, &output, filter)?;
            println!("{}", serde_json::to_string(&stats)?);
        }
        Command::Run {
            corpus,
            backend,
            resume,
            limit,
            stop_after_batches,
        } => run(&corpus, &backend, resume, limit, stop_after_batches).await?,
        Command::Report { store, out } => report(&store, &out)?,
        Command::Moderate {
            text,
            stdin,
            target,
            refine,
            json,
            backend,
        } => return moderate_cmd(text, stdin, target, refine, json, &backend).await,
        Command::Serve { backend, bind } => serve(&backend, bind).await?,
    }
    Ok(0)
}
