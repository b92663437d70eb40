//! `firmod.toml`, a single document at the project root. Relative paths
//! resolve against the root; command-line flags override keys.

use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::Context;
use firmod_core::corpus::DEFAULT_LENGTH_THRESHOLD;
use firmod_core::graph::{DrgWeighting, GraphWeights};
use firmod_llm::summarizer::DEFAULT_CHAR_BUDGET;
use firmod_llm::GatewayConfig;
use serde::Deserialize;

use crate::error::CliError;

pub const CONFIG_FILE: &str = "firmod.toml";

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectConfig {
    pub device: Option<String>,
    pub binary: Option<PathBuf>,
    /// Symbol-bearing build used for name↔address alignment when `binary`
    /// is stripped.
    pub symbols_binary: Option<PathBuf>,
    pub decompiled_manifest: Option<PathBuf>,
    pub source_root: Option<PathBuf>,
    pub category_definitions: Option<PathBuf>,
    pub length_threshold: Option<usize>,
    #[serde(default)]
    pub ground_truth: GroundTruthPaths,
    #[serde(default)]
    pub graph: GraphSection,
    #[serde(default)]
    pub llm: LlmSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruthPaths {
    pub modules: Option<PathBuf>,
    pub categories: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSection {
    /// `"alpha,beta,gamma"`.
    pub weights: Option<String>,
    pub drg: Option<DrgWeighting>,
    /// Extra function entries for stripped images, as hex strings.
    #[serde(default)]
    pub seeds: Vec<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LlmSection {
    pub base_url: Option<String>,
    pub api_key_env: String,
    pub models: Vec<String>,
    pub embed_model: Option<String>,
    pub retries: u32,
    pub concurrency: usize,
    pub timeout_seconds: u64,
    pub backoff_ms: u64,
    pub char_budget: usize,
    pub max_tokens: u32,
    pub cache: bool,
}

impl Default for LlmSection {
    fn default() -> Self {
        LlmSection {
            base_url: None,
            api_key_env: "FIRMOD_API_KEY".into(),
            models: Vec::new(),
            embed_model: None,
            retries: 3,
            concurrency: 4,
            timeout_seconds: 600,
            backoff_ms: 500,
            char_budget: DEFAULT_CHAR_BUDGET,
            max_tokens: firmod_llm::gateway::DEFAULT_MAX_TOKENS,
            cache: true,
        }
    }
}

/// A loaded configuration bound to its project root.
#[derive(Debug, Clone)]
pub struct Project {
    pub root: PathBuf,
    pub config: ProjectConfig,
}

fn missing_key(key: &str) -> anyhow::Error {
    CliError::Config(format!("`{key}` is not set in {CONFIG_FILE}")).into()
}

impl Project {
    /// Reads `config_path`, or starts from an empty configuration when the
    /// default file does not exist.
    pub fn load(root: &Path, config_path: Option<&Path>) -> anyhow::Result<Self> {
        let path = config_path.map_or_else(|| root.join(CONFIG_FILE), Path::to_path_buf);
        let config = match std::fs::read_to_string(&path) {
            Ok(text) => toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound && config_path.is_none() => ProjectConfig::default(),
            Err(e) => return Err(CliError::Config(format!("{}: {e}", path.display())).into()),
        };
        if config.length_threshold == Some(0) {
            return Err(CliError::Config("`length_threshold` must be at least 1".into()).into());
        }
        Ok(Project { root: root.to_path_buf(), config })
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.root.join(p)
        }
    }

    /// A configured path that must exist now.
    fn existing(&self, key: &str, value: &Option<PathBuf>) -> anyhow::Result<PathBuf> {
        let p = self.resolve(value.as_deref().ok_or_else(|| missing_key(key))?);
        if !p.exists() {
            return Err(CliError::Config(format!("`{key}` points to {}, which does not exist", p.display())).into());
        }
        Ok(p)
    }

    pub fn device(&self) -> String {
        self.config.device.clone().unwrap_or_else(|| "device".into())
    }

    pub fn binary(&self) -> anyhow::Result<PathBuf> {
        self.existing("binary", &self.config.binary)
    }

    pub fn symbols_binary(&self) -> anyhow::Result<PathBuf> {
        match &self.config.symbols_binary {
            Some(_) => self.existing("symbols_binary", &self.config.symbols_binary),
            None => self.binary(),
        }
    }

    pub fn decompiled_manifest(&self) -> anyhow::Result<PathBuf> {
        self.existing("decompiled_manifest", &self.config.decompiled_manifest)
    }

    pub fn source_root(&self) -> anyhow::Result<PathBuf> {
        self.existing("source_root", &self.config.source_root)
    }

    pub fn definitions_path(&self) -> anyhow::Result<Option<PathBuf>> {
        match &self.config.category_definitions {
            Some(_) => Ok(Some(self.existing("category_definitions", &self.config.category_definitions)?)),
            None => Ok(None),
        }
    }

    /// Both ground-truth files, or `MissingGroundTruth` when either is
    /// unset.
    pub fn ground_truth(&self) -> anyhow::Result<(PathBuf, PathBuf)> {
        let gt = &self.config.ground_truth;
        if gt.modules.is_none() || gt.categories.is_none() {
            return Err(CliError::MissingGroundTruth.into());
        }
        let m = self.resolve(gt.modules.as_deref().expect("checked"));
        let c = self.resolve(gt.categories.as_deref().expect("checked"));
        for p in [&m, &c] {
            if !p.is_file() {
                return Err(CliError::Missing { what: "ground truth file", detail: p.display().to_string() }.into());
            }
        }
        Ok((m, c))
    }

    pub fn length_threshold(&self) -> usize {
        self.config.length_threshold.unwrap_or(DEFAULT_LENGTH_THRESHOLD)
    }

    pub fn weights(&self, flag: Option<&str>) -> anyhow::Result<GraphWeights> {
        match flag.or(self.config.graph.weights.as_deref()) {
            Some(s) => s.parse().map_err(|e| CliError::Config(format!("graph weights {s:?}: {e}")).into()),
            None => Ok(GraphWeights::default()),
        }
    }

    pub fn seeds(&self) -> anyhow::Result<Vec<firmod_core::Addr>> {
        self.config
            .graph
            .seeds
            .iter()
            .map(|s| s.parse().map_err(|_| CliError::Config(format!("graph.seeds: bad address {s:?}")).into()))
            .collect()
    }

    /// Models named on the command line, else those in the config.
    pub fn models(&self, flag: &[String]) -> anyhow::Result<Vec<String>> {
        let models = if flag.is_empty() { self.config.llm.models.clone() } else { flag.to_vec() };
        if models.is_empty() {
            return Err(missing_key("llm.models"));
        }
        Ok(models)
    }

    /// Gateway settings; `mock_endpoint` replaces the base URL and drops
    /// the API key.
    pub fn gateway(&self, mock_endpoint: Option<&str>) -> anyhow::Result<GatewayConfig> {
        let llm = &self.config.llm;
        let base = mock_endpoint
            .map(str::to_string)
            .or_else(|| llm.base_url.clone())
            .ok_or_else(|| missing_key("llm.base_url"))?;
        let mut cfg = GatewayConfig::new(base);
        cfg.api_key = if mock_endpoint.is_some() { None } else { std::env::var(&llm.api_key_env).ok() };
        cfg.retries = llm.retries;
        cfg.concurrency = llm.concurrency.max(1);
        cfg.timeout = Duration::from_secs(llm.timeout_seconds);
        cfg.initial_backoff = Duration::from_millis(llm.backoff_ms);
        cfg.cache_dir = llm.cache.then(|| self.root.join("cache"));
        Ok(cfg)
    }
}

pub fn read_definitions(project: &Project) -> anyhow::Result<Vec<firmod_core::category::CategoryDefinition>> {
    match project.definitions_path()? {
        Some(p) => {
            let text = std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
            firmod_core::category::parse_definitions(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", p.display())).into())
        }
        None => Ok(firmod_core::category::default_definitions()),
    }
}
