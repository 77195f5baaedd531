//! TOML-backed run configuration, with command-line overrides layered on
//! top. Every key has a default, so a missing config file is equivalent to
//! an empty one; unknown keys are rejected to catch typos early.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Deserialize;
use tdpr_core::rag::context::DEFAULT_CONTEXT_BUDGET;
use tdpr_core::TrainConfig;

/// Embedding backend selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    /// Deterministic feature-hashing embedder; no network access.
    Hash,
    /// Remote embedding service speaking the JSON batch protocol.
    Http,
}

/// Generative-model backend selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum LlmKind {
    /// Deterministic offline stand-in; answers from prompt structure.
    Mock,
    /// Remote completion service.
    Http,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderSection {
    pub kind: ProviderKind,
    pub endpoint: String,
    pub dim: usize,
}

impl Default for ProviderSection {
    fn default() -> Self {
        ProviderSection {
            kind: ProviderKind::Hash,
            endpoint: String::new(),
            dim: 256,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmSection {
    pub kind: LlmKind,
    pub endpoint: String,
}

impl Default for LlmSection {
    fn default() -> Self {
        LlmSection {
            kind: LlmKind::Mock,
            endpoint: String::new(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrieverSection {
    /// Retriever method name; validated when a command actually uses it.
    pub method: String,
    pub k: usize,
    /// Number of documents to shortlist in the hierarchical first stage.
    pub d: usize,
    /// Optional trained adapter applied to every embedding call.
    pub adapter_path: Option<PathBuf>,
}

impl Default for RetrieverSection {
    fn default() -> Self {
        RetrieverSection {
            method: "bm25".to_string(),
            k: 10,
            d: 5,
            adapter_path: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub scale: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        TrainSection {
            learning_rate: d.learning_rate,
            epochs: d.epochs,
            batch_size: d.batch_size,
            scale: d.scale,
        }
    }
}

/// The full runtime configuration. The training section deliberately has
/// no seed of its own: the single top-level `seed` drives both adapter
/// initialization and batch shuffling, so one knob controls every source
/// of randomness in a run.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub corpus_path: PathBuf,
    pub index_dir: PathBuf,
    pub seed: u64,
    /// Token budget for assembled prompt context.
    pub context_budget: usize,
    pub provider: ProviderSection,
    pub llm: LlmSection,
    pub retriever: RetrieverSection,
    pub train: TrainSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            corpus_path: PathBuf::from("corpus.jsonl"),
            index_dir: PathBuf::from("index"),
            seed: 42,
            context_budget: DEFAULT_CONTEXT_BUDGET,
            provider: ProviderSection::default(),
            llm: LlmSection::default(),
            retriever: RetrieverSection::default(),
            train: TrainSection::default(),
        }
    }
}

impl RunConfig {
    /// Load from a TOML file, or fall back to defaults when no path is
    /// given. A path that does not exist or does not parse is an error;
    /// silently ignoring it would mask typos in `--config`.
    pub fn load(path: Option<&Path>) -> anyhow::Result<RunConfig> {
        match path {
            None => Ok(RunConfig::default()),
            Some(p) => {
                let text = fs::read_to_string(p)
                    .with_context(|| format!("reading config '{}'", p.display()))?;
                toml::from_str(&text)
                    .with_context(|| format!("parsing config '{}'", p.display()))
            }
        }
    }

    /// The adapter path, treating an empty string as unset so a flag can
    /// clear a config-file value (`--adapter ""`).
    pub fn adapter_path(&self) -> Option<&Path> {
        self.retriever
            .adapter_path
            .as_deref()
            .filter(|p| !p.as_os_str().is_empty())
    }

    /// Build the trainer configuration from the training section plus the
    /// shared seed.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.train.learning_rate,
            epochs: self.train.epochs,
            batch_size: self.train.batch_size,
            scale: self.train.scale,
            seed: self.seed,
        }
    }

    pub fn apply(mut self, o: &Overrides) -> Self {
        if let Some(v) = &o.corpus_path {
            self.corpus_path = v.clone();
        }
        if let Some(v) = &o.index_dir {
            self.index_dir = v.clone();
        }
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = o.context_budget {
            self.context_budget = v;
        }
        if let Some(v) = o.provider {
            self.provider.kind = v;
        }
        if let Some(v) = &o.provider_endpoint {
            self.provider.endpoint = v.clone();
        }
        if let Some(v) = o.dim {
            self.provider.dim = v;
        }
        if let Some(v) = o.llm {
            self.llm.kind = v;
        }
        if let Some(v) = &o.llm_endpoint {
            self.llm.endpoint = v.clone();
        }
        if let Some(v) = &o.method {
            self.retriever.method = v.clone();
        }
        if let Some(v) = o.k {
            self.retriever.k = v;
        }
        if let Some(v) = o.d {
            self.retriever.d = v;
        }
        if let Some(v) = &o.adapter {
            self.retriever.adapter_path = Some(v.clone());
        }
        if let Some(v) = o.learning_rate {
            self.train.learning_rate = v;
        }
        if let Some(v) = o.epochs {
            self.train.epochs = v;
        }
        if let Some(v) = o.batch_size {
            self.train.batch_size = v;
        }
        if let Some(v) = o.scale {
            self.train.scale = v;
        }
        self
    }
}

/// Flag-level overrides; `None` means "keep the config value".
#[derive(Debug, Default, Clone, clap::Args)]
pub struct Overrides {
    /// Normalized corpus JSONL path.
    #[arg(long, global = true)]
    pub corpus_path: Option<PathBuf>,
    /// Directory holding the index artifacts.
    #[arg(long, global = true)]
    pub index_dir: Option<PathBuf>,
    /// Seed for every source of randomness in a run.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Token budget for assembled prompt context.
    #[arg(long, global = true)]
    pub context_budget: Option<usize>,
    /// Embedding backend.
    #[arg(long, global = true, value_enum)]
    pub provider: Option<ProviderKind>,
    /// Embedding service endpoint (http provider only).
    #[arg(long, global = true)]
    pub provider_endpoint: Option<String>,
    /// Embedding dimension.
    #[arg(long, global = true)]
    pub dim: Option<usize>,
    /// Generative-model backend.
    #[arg(long, global = true, value_enum)]
    pub llm: Option<LlmKind>,
    /// Completion service endpoint (http backend only).
    #[arg(long, global = true)]
    pub llm_endpoint: Option<String>,
    /// Retriever method: bm25, dpr, or dhr.
    #[arg(long, global = true)]
    pub method: Option<String>,
    /// Number of passages to retrieve.
    #[arg(long, global = true)]
    pub k: Option<usize>,
    /// Document shortlist size for dhr.
    #[arg(long, global = true)]
    pub d: Option<usize>,
    /// Trained adapter to apply to embeddings ("" clears a config value).
    #[arg(long, global = true)]
    pub adapter: Option<PathBuf>,
    /// Adapter training learning rate.
    #[arg(long, global = true)]
    pub learning_rate: Option<f64>,
    /// Adapter training epochs.
    #[arg(long, global = true)]
    pub epochs: Option<usize>,
    /// Adapter training batch size.
    #[arg(long, global = true)]
    pub batch_size: Option<usize>,
    /// Similarity scale inside the training softmax.
    #[arg(long, global = true)]
    pub scale: Option<f64>,
}
