//! The single JSON configuration document driving CLI runs: corpus paths,
//! backend wiring, detector knobs, search parameters, verdict thresholds,
//! and an optional synthetic scenario.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::corpus::{load_jsonl, CorpusSplit};
use crate::detectors::{DetectorHandles, DetectorId};
use crate::error::{Error, Result};
use crate::gateway::cache::ResponseCache;
use crate::gateway::http::{HttpAuxBackend, HttpTargetBackend};
use crate::gateway::ngram::{train_ngram, NgramBackend, SmoothingParams};
use crate::gateway::scripted::ScriptedAux;
use crate::gateway::{ModelHandle, DEFAULT_IN_FLIGHT_LIMIT};
use crate::metrics::{PerfObjective, DEFAULT_FPR_LEVELS};
use crate::scenario::ScenarioSpec;
use crate::search::SearchConfig;

pub const CACHE_DIR_ENV: &str = "AUDIT_CACHE_DIR";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusSection {
    pub pro: PathBuf,
    pub held: PathBuf,
}

/// One backend's wiring.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BackendSpec {
    /// OpenAI-style completions endpoint with token logprobs.
    HttpTarget {
        base_url: String,
        model: String,
        #[serde(default = "default_logprobs_k")]
        logprobs_k: u32,
    },
    /// OpenAI-style chat endpoint for rewriting.
    HttpAuxiliary { base_url: String, model: String },
    /// Deterministic n-gram memorizer trained from a JSONL corpus.
    NgramSim {
        train_path: PathBuf,
        #[serde(default = "default_order")]
        order: usize,
        #[serde(default = "default_alpha")]
        alpha: f64,
        #[serde(default)]
        interpolation_weights: Option<Vec<f64>>,
        #[serde(default = "default_cache_weight")]
        prefix_cache_weight: f64,
    },
    /// Deterministic scripted rewriter.
    ScriptedAux,
}

fn default_logprobs_k() -> u32 {
    5
}
fn default_order() -> usize {
    3
}
fn default_alpha() -> f64 {
    0.1
}
fn default_cache_weight() -> f64 {
    0.25
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BackendsSection {
    pub target: BackendSpec,
    pub auxiliary: BackendSpec,
    #[serde(default)]
    pub reference: Option<BackendSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectorsSection {
    #[serde(default = "default_primary")]
    pub primary: String,
    #[serde(default = "default_k_percent")]
    pub k_percent: f64,
    #[serde(default = "default_recall_shots")]
    pub recall_shots: usize,
}

fn default_primary() -> String {
    "loss".into()
}
fn default_k_percent() -> f64 {
    20.0
}
fn default_recall_shots() -> usize {
    5
}

impl Default for DetectorsSection {
    fn default() -> Self {
        DetectorsSection {
            primary: default_primary(),
            k_percent: default_k_percent(),
            recall_shots: default_recall_shots(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchSection {
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default = "default_l")]
    pub l: usize,
    #[serde(default = "default_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_max_continuation")]
    pub max_continuation_tokens: usize,
    #[serde(default = "default_plateau")]
    pub plateau: usize,
    #[serde(default)]
    pub stage1_subsample: Option<usize>,
    #[serde(default)]
    pub objective: PerfObjective,
    #[serde(default = "default_fpr_levels")]
    pub fpr_levels: Vec<f64>,
}

fn default_n() -> usize {
    10
}
fn default_m() -> usize {
    5
}
fn default_l() -> usize {
    5
}
fn default_iterations() -> usize {
    10
}
fn default_top_k() -> usize {
    5
}
fn default_max_continuation() -> usize {
    64
}
fn default_plateau() -> usize {
    3
}
fn default_fpr_levels() -> Vec<f64> {
    DEFAULT_FPR_LEVELS.to_vec()
}

impl Default for SearchSection {
    fn default() -> Self {
        SearchSection {
            n: default_n(),
            m: default_m(),
            l: default_l(),
            max_iterations: default_iterations(),
            top_k: default_top_k(),
            seed: 0,
            max_continuation_tokens: default_max_continuation(),
            plateau: default_plateau(),
            stage1_subsample: None,
            objective: PerfObjective::Auc,
            fpr_levels: default_fpr_levels(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerdictSection {
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_theta")]
    pub theta: f64,
}

fn default_delta() -> f64 {
    0.05
}
fn default_theta() -> f64 {
    0.65
}

impl Default for VerdictSection {
    fn default() -> Self {
        VerdictSection {
            delta: default_delta(),
            theta: default_theta(),
        }
    }
}

/// The whole configuration document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditConfig {
    #[serde(default)]
    pub corpus: Option<CorpusSection>,
    #[serde(default)]
    pub backends: Option<BackendsSection>,
    #[serde(default)]
    pub detectors: DetectorsSection,
    #[serde(default)]
    pub search: SearchSection,
    #[serde(default)]
    pub verdict: VerdictSection,
    #[serde(default)]
    pub scenario: Option<ScenarioSpec>,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    #[serde(default = "default_in_flight")]
    pub in_flight_limit: usize,
}

fn default_in_flight() -> usize {
    DEFAULT_IN_FLIGHT_LIMIT
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig {
            corpus: None,
            backends: None,
            detectors: DetectorsSection::default(),
            search: SearchSection::default(),
            verdict: VerdictSection::default(),
            scenario: None,
            cache_dir: None,
            in_flight_limit: default_in_flight(),
        }
    }
}

impl AuditConfig {
    pub fn load(path: &Path) -> Result<AuditConfig> {
        let data = std::fs::read_to_string(path)?;
        serde_json::from_str(&data).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Flatten the sections into the search-facing config.
    pub fn search_config(&self) -> Result<SearchConfig> {
        Ok(SearchConfig {
            n: self.search.n,
            m: self.search.m,
            l: self.search.l,
            max_iterations: self.search.max_iterations,
            top_k: self.search.top_k,
            seed: self.search.seed,
            detector: DetectorId::parse(&self.detectors.primary)?,
            objective: self.search.objective,
            fpr_levels: self.search.fpr_levels.clone(),
            max_continuation_tokens: self.search.max_continuation_tokens,
            plateau: self.search.plateau,
            stage1_subsample: self.search.stage1_subsample,
            k_percent: self.detectors.k_percent,
            recall_shots: self.detectors.recall_shots,
            delta: self.verdict.delta,
            theta: self.verdict.theta,
        })
    }

    pub fn load_corpus(&self) -> Result<CorpusSplit> {
        let section = self
            .corpus
            .as_ref()
            .ok_or_else(|| Error::Config("config has no corpus section".into()))?;
        CorpusSplit::new(load_jsonl(&section.pro)?, load_jsonl(&section.held)?)
    }

    /// Resolve the cache directory: explicit config, then the environment
    /// variable. `no_cache` disables caching outright.
    pub fn open_cache(&self, no_cache: bool) -> Result<Option<Arc<ResponseCache>>> {
        if no_cache {
            return Ok(None);
        }
        let dir = self
            .cache_dir
            .clone()
            .or_else(|| std::env::var(CACHE_DIR_ENV).ok().map(PathBuf::from));
        match dir {
            Some(dir) => Ok(Some(Arc::new(ResponseCache::open(dir)?))),
            None => Ok(None),
        }
    }

    fn build_backend(&self, spec: &BackendSpec) -> Result<ModelHandle> {
        let backend: Arc<dyn crate::gateway::Backend> = match spec {
            BackendSpec::HttpTarget {
                base_url,
                model,
                logprobs_k,
            } => Arc::new(HttpTargetBackend::new(base_url, model, *logprobs_k)?),
            BackendSpec::HttpAuxiliary { base_url, model } => {
                Arc::new(HttpAuxBackend::new(base_url, model)?)
            }
            BackendSpec::NgramSim {
                train_path,
                order,
                alpha,
                interpolation_weights,
                prefix_cache_weight,
            } => {
                let samples = load_jsonl(train_path)?;
                let params = SmoothingParams {
                    alpha: *alpha,
                    interpolation_weights: interpolation_weights.clone().unwrap_or_else(|| {
                        SmoothingParams::default_for_order(*order).interpolation_weights
                    }),
                    prefix_cache_weight: *prefix_cache_weight,
                };
                Arc::new(NgramBackend::new(train_ngram(&samples, *order, params)?))
            }
            BackendSpec::ScriptedAux => Arc::new(ScriptedAux::new()),
        };
        Ok(ModelHandle::new(backend).with_in_flight_limit(self.in_flight_limit))
    }

    /// Build the full handle bundle from the backends section.
    pub fn build_handles(&self, cache: Option<Arc<ResponseCache>>) -> Result<DetectorHandles> {
        let section = self
            .backends
            .as_ref()
            .ok_or_else(|| Error::Config("config has no backends section".into()))?;
        let attach = |handle: ModelHandle| match &cache {
            Some(c) => handle.with_cache(c.clone()),
            None => handle,
        };
        let target = attach(self.build_backend(&section.target)?);
        let auxiliary = attach(self.build_backend(&section.auxiliary)?);
        let reference = match &section.reference {
            Some(spec) => Some(attach(self.build_backend(spec)?)),
            None => None,
        };
        Ok(DetectorHandles {
            target,
            reference,
            auxiliary: Some(auxiliary),
        })
    }
}
