//! Run configuration: defaults, then the TOML config file, then flags.
//!
//! ```toml
//! map = "world/map.jsonl"
//! forest = "world/forest.jsonl"
//! k = 10
//! concurrency = 8
//! seed = 0
//! backend = "mock"            # every role
//!
//! [backends]                  # per-role overrides
//! generator = "remote"
//!
//! [clustering]
//! linkage = "average"
//! metric_dims = "xy"
//! threshold_schedule = [2.0, 4.0, 8.0]
//! max_children = 10
//!
//! summary_budget = 200
//! prompts_dir = "prompts"
//! ```
//!
//! Remote credentials come from the environment only.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use erag_core::llm_gateway::{
    Backend, BackendKind, Gateway, MockBackend, PromptTemplates, RemoteBackend, RemoteConfig, ResponseCache, Role,
};
use erag_core::retrieval::DEFAULT_K;
use erag_core::semantic_forest::{
    geometric_schedule, ClusteringConfig, Linkage, MetricDims, DEFAULT_MAX_CHILDREN, DEFAULT_SUMMARY_BUDGET,
};
use erag_core::topo_map::TopologicalMap;
use serde::Deserialize;

use crate::CliError;

pub const DEFAULT_CONCURRENCY: usize = 8;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusteringSection {
    pub linkage: Option<Linkage>,
    pub metric_dims: Option<MetricDims>,
    pub threshold_schedule: Option<Vec<f64>>,
    pub max_children: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendSection {
    pub summarizer: Option<BackendKind>,
    pub selector: Option<BackendKind>,
    pub generator: Option<BackendKind>,
    pub embedder: Option<BackendKind>,
}

/// Contents of a `--config` file; every field is optional.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub map: Option<PathBuf>,
    pub forest: Option<PathBuf>,
    pub k: Option<usize>,
    pub concurrency: Option<usize>,
    pub seed: Option<u64>,
    pub backend: Option<BackendKind>,
    #[serde(default)]
    pub backends: BackendSection,
    #[serde(default)]
    pub clustering: ClusteringSection,
    pub summary_budget: Option<usize>,
    pub prompts_dir: Option<PathBuf>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
    }
}

/// Settings that flags may override.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub map: Option<PathBuf>,
    pub forest: Option<PathBuf>,
    pub k: Option<usize>,
    pub concurrency: Option<usize>,
    pub seed: Option<u64>,
    pub backend: Option<BackendKind>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub map: Option<PathBuf>,
    pub forest: Option<PathBuf>,
    /// Backend per role, in `Role::ALL` order.
    pub backends: [BackendKind; 4],
    pub clustering: ClusteringSection,
    pub summary_budget: usize,
    pub prompts_dir: Option<PathBuf>,
    pub k: usize,
    pub concurrency: usize,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            map: None,
            forest: None,
            backends: [BackendKind::Mock; 4],
            clustering: ClusteringSection::default(),
            summary_budget: DEFAULT_SUMMARY_BUDGET,
            prompts_dir: None,
            k: DEFAULT_K,
            concurrency: DEFAULT_CONCURRENCY,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn resolve(file: Option<ConfigFile>, flags: Overrides) -> Result<Self, CliError> {
        let mut cfg = RunConfig::default();
        if let Some(f) = file {
            cfg.map = f.map.or(cfg.map);
            cfg.forest = f.forest.or(cfg.forest);
            cfg.k = f.k.unwrap_or(cfg.k);
            cfg.concurrency = f.concurrency.unwrap_or(cfg.concurrency);
            cfg.seed = f.seed.unwrap_or(cfg.seed);
            if let Some(b) = f.backend {
                cfg.backends = [b; 4];
            }
            let per_role = [f.backends.summarizer, f.backends.selector, f.backends.generator, f.backends.embedder];
            for (slot, b) in cfg.backends.iter_mut().zip(per_role) {
                if let Some(b) = b {
                    *slot = b;
                }
            }
            cfg.clustering = f.clustering;
            cfg.summary_budget = f.summary_budget.unwrap_or(cfg.summary_budget);
            cfg.prompts_dir = f.prompts_dir;
        }
        cfg.map = flags.map.or(cfg.map);
        cfg.forest = flags.forest.or(cfg.forest);
        cfg.k = flags.k.unwrap_or(cfg.k);
        cfg.concurrency = flags.concurrency.unwrap_or(cfg.concurrency);
        cfg.seed = flags.seed.unwrap_or(cfg.seed);
        if let Some(b) = flags.backend {
            cfg.backends = [b; 4];
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.k == 0 {
            return Err(CliError::Usage("k must be at least 1".into()));
        }
        if self.concurrency == 0 {
            return Err(CliError::Usage("concurrency must be at least 1".into()));
        }
        if self.summary_budget == 0 {
            return Err(CliError::Usage("summary_budget must be at least 1".into()));
        }
        Ok(())
    }

    pub fn backend(&self, role: Role) -> BackendKind {
        self.backends[Role::ALL.iter().position(|r| *r == role).expect("known role")]
    }

    pub fn map_path(&self) -> Result<&Path, CliError> {
        self.map.as_deref().ok_or_else(|| CliError::Usage("--map is required".into()))
    }

    pub fn forest_path(&self) -> Result<&Path, CliError> {
        self.forest.as_deref().ok_or_else(|| CliError::Usage("--forest is required".into()))
    }

    /// Clustering settings for `map`, with the geometric schedule unless one
    /// is configured.
    pub fn clustering_for(&self, map: &TopologicalMap) -> ClusteringConfig {
        let dims = self.clustering.metric_dims.unwrap_or_default();
        ClusteringConfig {
            linkage: self.clustering.linkage.unwrap_or_default(),
            metric_dims: dims,
            threshold_schedule: self
                .clustering
                .threshold_schedule
                .clone()
                .unwrap_or_else(|| geometric_schedule(map, dims)),
            max_children: self.clustering.max_children.unwrap_or(DEFAULT_MAX_CHILDREN),
        }
    }

    /// Builds the gateway. Remote roles share one persistent response
    /// cache at `cache_path` when given.
    pub fn gateway(&self, cache_path: Option<&Path>) -> Result<Gateway, CliError> {
        let mut builder = Gateway::builder().max_in_flight(self.concurrency).seed(self.seed);
        if self.backends.contains(&BackendKind::Remote) {
            let prompts = match &self.prompts_dir {
                Some(dir) => PromptTemplates::with_overrides(dir).map_err(|e| CliError::Input(e.to_string()))?,
                None => PromptTemplates::default(),
            };
            let remote: Arc<dyn Backend> = Arc::new(RemoteBackend::new(RemoteConfig::from_env(), prompts));
            let mock: Arc<dyn Backend> = Arc::new(MockBackend::new());
            for role in Role::ALL {
                let b = match self.backend(role) {
                    BackendKind::Remote => remote.clone(),
                    BackendKind::Mock => mock.clone(),
                };
                builder = builder.backend(role, b);
            }
            if let Some(path) = cache_path {
                let cache = ResponseCache::open(path).map_err(|e| CliError::Input(e.to_string()))?;
                builder = builder.cache(Arc::new(cache));
            }
        }
        Ok(builder.build())
    }
}

/// The response cache that sits next to a forest file.
pub fn cache_path_for(forest: &Path) -> PathBuf {
    let mut name = forest.as_os_str().to_owned();
    name.push(".cache.jsonl");
    PathBuf::from(name)
}
