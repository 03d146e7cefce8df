//! TOML run configuration, validation and the config hash.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use emodrift_core::backends::{
    HttpBackendConfig, HttpClassifier, HttpRewriter, MockClassifier, MockRewriter, ResponseCache,
    RetryPolicy, RewriterKind,
};
use emodrift_core::pipeline::{DEFAULT_DEAD_BAND, DEFAULT_MAX_ROUNDS};
use emodrift_core::prompts::{ExemplarStore, StyleTemplates, DEFAULT_FEW_SHOT_K};
use emodrift_core::{
    ClassifierBackend, CoreEmotion, CoreMappingTable, DriftMetric, Engine, EngineSettings,
    FineLabel, RewriterBackend, VadPrototypeTable, VadVector,
};

/// Version tag of the config hash algorithm, printed by `--version`.
pub const CONFIG_HASH_VERSION: &str = "sha256-v1";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Mock,
    /// Classifier over `/v1/classify`.
    Http,
    /// Rewriter over `/v1/rewrite`.
    Native,
    /// Rewriter over `/v1/chat/completions`.
    Chat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BackendSection {
    pub kind: BackendKind,
    pub base_url: Option<String>,
    pub model: String,
    /// Environment variable holding a bearer token.
    pub api_key_env: Option<String>,
    pub timeout_secs: f64,
    pub max_attempts: u32,
    pub initial_backoff_ms: u64,
    /// Decoding parameters forwarded to chat endpoints.
    pub params: serde_json::Map<String, serde_json::Value>,
}

impl Default for BackendSection {
    fn default() -> Self {
        let retry = RetryPolicy::default();
        Self {
            kind: BackendKind::Mock,
            base_url: None,
            model: String::new(),
            api_key_env: None,
            timeout_secs: 30.0,
            max_attempts: retry.max_attempts,
            initial_backoff_ms: retry.initial_backoff.as_millis() as u64,
            params: serde_json::Map::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GatewaySection {
    pub bind: String,
    pub max_concurrency: usize,
}

impl Default for GatewaySection {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1:8080".into(),
            max_concurrency: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub run_id: Option<String>,
    pub output_dir: PathBuf,
    pub parallelism: usize,
    pub batch_size: usize,
    /// Response cache file shared by both backends.
    pub cache: Option<PathBuf>,
    pub drift_metric: DriftMetric,
    /// Mitigation target; defaults to the happiness prototype.
    pub target: Option<[f64; 3]>,
    pub harmful_emotions: BTreeSet<CoreEmotion>,
    pub refine: bool,
    pub dead_band: f64,
    pub max_rounds: u32,
    pub few_shot_k: usize,
    pub prototypes: Option<PathBuf>,
    pub mapping: Option<PathBuf>,
    pub templates: Option<PathBuf>,
    pub exemplars: Option<PathBuf>,
    pub classifier: BackendSection,
    pub rewriter: BackendSection,
    pub gateway: GatewaySection,
}

impl Default for RunConfig {
    fn default() -> Self {
        let settings = EngineSettings::default();
        Self {
            run_id: None,
            output_dir: PathBuf::from("runs"),
            parallelism: 4,
            batch_size: 100,
            cache: None,
            drift_metric: DriftMetric::Squared,
            target: None,
            harmful_emotions: settings.harmful,
            refine: false,
            dead_band: DEFAULT_DEAD_BAND,
            max_rounds: DEFAULT_MAX_ROUNDS,
            few_shot_k: DEFAULT_FEW_SHOT_K,
            prototypes: None,
            mapping: None,
            templates: None,
            exemplars: None,
            classifier: BackendSection::default(),
            rewriter: BackendSection::default(),
            gateway: GatewaySection::default(),
        }
    }
}

/// Tables after applying overrides.
pub struct Tables {
    pub prototypes: VadPrototypeTable,
    pub mapping: CoreMappingTable,
    pub templates: StyleTemplates,
    pub exemplars: ExemplarStore,
    exemplars_digest: String,
}

/// The parts of a config that determine record contents.
#[derive(Serialize)]
struct HashInput<'a> {
    algorithm: &'static str,
    classifier: (BackendKind, &'a str),
    rewriter: (
        BackendKind,
        &'a str,
        &'a serde_json::Map<String, serde_json::Value>,
    ),
    drift_metric: DriftMetric,
    target: Option<[f64; 3]>,
    harmful_emotions: &'a BTreeSet<CoreEmotion>,
    refine: bool,
    dead_band: f64,
    max_rounds: u32,
    few_shot_k: usize,
    prototypes: serde_json::Value,
    mapping: Vec<(FineLabel, CoreEmotion)>,
    templates: String,
    exemplars: &'a str,
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config: RunConfig = toml::from_str(&text)?;
        // relative override paths resolve against the config file
        if let Some(dir) = path.parent() {
            for p in [
                &mut config.prototypes,
                &mut config.mapping,
                &mut config.templates,
                &mut config.exemplars,
                &mut config.cache,
            ]
            .into_iter()
            .flatten()
            {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(config)
    }

    /// Forces both backends to the offline mocks.
    pub fn use_mocks(&mut self) {
        self.classifier.kind = BackendKind::Mock;
        self.rewriter.kind = BackendKind::Mock;
    }

    /// Checks everything that can be checked without network access and
    /// loads the tables. Reports every problem at once.
    pub fn validate(&self) -> Result<Tables, ConfigError> {
        let mut problems = Vec::new();
        if self.parallelism == 0 {
            problems.push("parallelism must be at least 1".to_string());
        }
        if self.batch_size == 0 {
            problems.push("batch_size must be at least 1".to_string());
        }
        if self.gateway.max_concurrency == 0 {
            problems.push("gateway.max_concurrency must be at least 1".to_string());
        }
        if !(0.0..1.0).contains(&self.dead_band) {
            problems.push(format!("dead_band {} must be in [0, 1)", self.dead_band));
        }
        if self.max_rounds == 0 {
            problems.push("max_rounds must be at least 1".to_string());
        }
        if self.harmful_emotions.is_empty() {
            problems.push("harmful_emotions must not be empty".to_string());
        }
        if let Some([v, a, d]) = self.target {
            if let Err(e) = VadVector::new(v, a, d) {
                problems.push(format!("target: {e}"));
            }
        }
        for (name, section, allowed) in [
            (
                "classifier",
                &self.classifier,
                &[BackendKind::Mock, BackendKind::Http][..],
            ),
            (
                "rewriter",
                &self.rewriter,
                &[BackendKind::Mock, BackendKind::Native, BackendKind::Chat][..],
            ),
        ] {
            if !allowed.contains(&section.kind) {
                problems.push(format!(
                    "{name}.kind {:?} is not a {name} backend",
                    section.kind
                ));
            }
            if section.kind == BackendKind::Mock {
                continue;
            }
            if section
                .base_url
                .as_deref()
                .is_none_or(|u| u.trim().is_empty())
            {
                problems.push(format!(
                    "{name}.base_url is required for {:?}",
                    section.kind
                ));
            }
            if !(section.timeout_secs > 0.0 && section.timeout_secs.is_finite()) {
                problems.push(format!("{name}.timeout_secs must be positive"));
            }
            if section.max_attempts == 0 {
                problems.push(format!("{name}.max_attempts must be at least 1"));
            }
            if let Some(var) = &section.api_key_env {
                if std::env::var(var).is_err() {
                    problems.push(format!("{name}.api_key_env: ${var} is not set"));
                }
            }
        }

        let prototypes = match &self.prototypes {
            Some(p) => {
                VadPrototypeTable::load(p).map_err(|e| format!("prototypes {}: {e}", p.display()))
            }
            None => Ok(VadPrototypeTable::default()),
        };
        let mapping = match &self.mapping {
            Some(p) => {
                CoreMappingTable::load(p).map_err(|e| format!("mapping {}: {e}", p.display()))
            }
            None => Ok(CoreMappingTable::default()),
        };
        let templates = match &self.templates {
            Some(p) => {
                StyleTemplates::load(p).map_err(|e| format!("templates {}: {e}", p.display()))
            }
            None => Ok(StyleTemplates::default()),
        };
        let exemplars = match &self.exemplars {
            Some(p) => std::fs::read(p)
                .map_err(|e| format!("exemplars {}: {e}", p.display()))
                .and_then(|bytes| {
                    let text = String::from_utf8_lossy(&bytes);
                    ExemplarStore::from_json_str(&text)
                        .map(|s| (s, hex::encode(Sha256::digest(&bytes))))
                        .map_err(|e| format!("exemplars {}: {e}", p.display()))
                }),
            None => Ok((ExemplarStore::default(), "builtin".to_string())),
        };
        match (prototypes, mapping, templates, exemplars) {
            (Ok(prototypes), Ok(mapping), Ok(templates), Ok((exemplars, exemplars_digest)))
                if problems.is_empty() =>
            {
                Ok(Tables {
                    prototypes,
                    mapping,
                    templates,
                    exemplars,
                    exemplars_digest,
                })
            }
            (p, m, t, x) => {
                problems.extend(p.err());
                problems.extend(m.err());
                problems.extend(t.err());
                problems.extend(x.err());
                Err(ConfigError::Invalid(problems))
            }
        }
    }

    /// sha256 over a canonical JSON of everything that affects record
    /// contents. Paths, concurrency, credentials and retry settings are excluded.
    pub fn config_hash(&self, tables: &Tables) -> String {
        let input = HashInput {
            algorithm: CONFIG_HASH_VERSION,
            classifier: (self.classifier.kind, &self.classifier.model),
            rewriter: (
                self.rewriter.kind,
                &self.rewriter.model,
                &self.rewriter.params,
            ),
            drift_metric: self.drift_metric,
            target: self.target,
            harmful_emotions: &self.harmful_emotions,
            refine: self.refine,
            dead_band: self.dead_band,
            max_rounds: self.max_rounds,
            few_shot_k: self.few_shot_k,
            prototypes: serde_json::from_str(&tables.prototypes.to_json_string())
                .expect("prototype json is valid"),
            mapping: FineLabel::ALL
                .iter()
                .filter_map(|l| tables.mapping.map_fine_to_core(*l).ok().map(|c| (*l, c)))
                .collect(),
            templates: tables.templates.content_hash(),
            exemplars: &tables.exemplars_digest,
        };
        let json = serde_json::to_vec(&input).expect("hash input serializes");
        hex::encode(Sha256::digest(&json))
    }

    fn http_config(&self, section: &BackendSection) -> HttpBackendConfig {
        let mut c = HttpBackendConfig::new(
            section.base_url.clone().unwrap_or_default(),
            section.model.clone(),
        );
        c.api_key = section
            .api_key_env
            .as_ref()
            .and_then(|v| std::env::var(v).ok());
        c.timeout = Duration::from_secs_f64(section.timeout_secs);
        c.retry = RetryPolicy {
            max_attempts: section.max_attempts,
            initial_backoff: Duration::from_millis(section.initial_backoff_ms),
            ..RetryPolicy::default()
        };
        c.parallelism = self.parallelism;
        c.params = section.params.clone();
        c
    }

    /// Validates, then builds the engine. No network traffic happens here.
    pub fn build_engine(&self) -> anyhow::Result<Engine> {
        let tables = self.validate()?;
        let config_hash = self.config_hash(&tables);
        let cache = match &self.cache {
            Some(p) => {
                if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                    std::fs::create_dir_all(dir)?;
                }
                Some(Arc::new(ResponseCache::open(p)?))
            }
            None => None,
        };
        let classifier: Arc<dyn ClassifierBackend> = match self.classifier.kind {
            BackendKind::Mock => Arc::new(MockClassifier::new()),
            _ => Arc::new(HttpClassifier::new(
                self.http_config(&self.classifier),
                cache.clone(),
            )?),
        };
        let rewriter: Arc<dyn RewriterBackend> = match self.rewriter.kind {
            BackendKind::Mock => Arc::new(MockRewriter::new()),
            BackendKind::Chat => Arc::new(HttpRewriter::new(
                RewriterKind::Chat,
                self.http_config(&self.rewriter),
                cache,
            )?),
            _ => Arc::new(HttpRewriter::new(
                RewriterKind::Native,
                self.http_config(&self.rewriter),
                cache,
            )?),
        };
        let target = match self.target {
            Some([v, a, d]) => VadVector::new(v, a, d)?,
            None => tables.prototypes.prototype(CoreEmotion::Happiness),
        };
        let mut engine = Engine::new(classifier, rewriter);
        engine.prototypes = tables.prototypes;
        engine.mapping = tables.mapping;
        engine.templates = tables.templates;
        engine.exemplars = tables.exemplars;
        engine.settings = EngineSettings {
            drift_metric: self.drift_metric,
            target,
            dead_band: self.dead_band,
            max_rounds: self.max_rounds,
            few_shot_k: self.few_shot_k,
            harmful: self.harmful_emotions.clone(),
        };
        engine.config_hash = config_hash;
        Ok(engine)
    }
}
