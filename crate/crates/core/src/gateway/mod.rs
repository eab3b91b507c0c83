//! Uniform access layer to the target model (token log-probabilities and
//! continuations) and the auxiliary model (instruction-driven rewriting).
//!
//! Every backend sits behind [`ModelHandle`], which enforces capability
//! checks, routes results through the persistent response cache, bounds
//! concurrent backend calls, and counts operations. Operations invoked on a
//! handle without the matching capability fail loudly; there is no silent
//! degradation.

pub mod cache;
pub mod http;
pub mod ngram;
pub mod scripted;
pub mod tokenizer;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prompt::RewritePrompt;

use cache::{cache_key, ResponseCache};

/// One scored token under teacher forcing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenScore {
    pub token: String,
    /// Natural log probability, always <= 0.
    pub logprob: f64,
    /// Optional top alternatives at this position, probabilities
    /// non-increasing.
    pub top_alternatives: Option<Vec<(String, f64)>>,
}

/// Mean and population standard deviation of the full vocabulary's
/// log-probabilities at one position. Only full-vocab-stats backends can
/// produce these.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VocabStats {
    pub mu: f64,
    pub sigma: f64,
}

/// A greedy continuation plus the per-step maximum next-token probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Continuation {
    pub text: String,
    pub step_max_probs: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    HttpTarget,
    HttpAuxiliary,
    NgramSim,
    ScriptedAux,
}

impl BackendKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            BackendKind::HttpTarget => "http-target",
            BackendKind::HttpAuxiliary => "http-auxiliary",
            BackendKind::NgramSim => "ngram-sim",
            BackendKind::ScriptedAux => "scripted-aux",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Capabilities {
    pub token_logprobs: bool,
    pub full_vocab_stats: bool,
    pub continuation: bool,
    pub rewrite: bool,
}

/// Raw model access implemented by simulators and HTTP clients. Callers go
/// through [`ModelHandle`] instead of using this directly.
pub trait Backend: Send + Sync {
    fn kind(&self) -> BackendKind;
    fn model_id(&self) -> &str;
    fn capabilities(&self) -> Capabilities;

    fn score_tokens(&self, text: &str, prefix: Option<&str>) -> Result<Vec<TokenScore>>;

    fn vocab_stats(&self, _text: &str, _prefix: Option<&str>) -> Result<Vec<VocabStats>> {
        Err(Error::UnsupportedDetector {
            detector: "minkpp".into(),
            reason: format!(
                "backend '{}' does not expose full-vocabulary statistics",
                self.model_id()
            ),
        })
    }

    fn generate(&self, prefix: &str, max_tokens: usize) -> Result<Continuation>;

    fn rewrite(&self, prompt: &RewritePrompt, text: &str) -> Result<String>;

    fn instruct(&self, instruction: &str, materials: &[String]) -> Result<String>;
}

/// Per-operation call counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCounts {
    pub score_tokens: u64,
    pub vocab_stats: u64,
    pub generate: u64,
    pub rewrite: u64,
    pub instruct: u64,
}

#[derive(Default)]
struct AtomicOpCounts {
    score_tokens: AtomicU64,
    vocab_stats: AtomicU64,
    generate: AtomicU64,
    rewrite: AtomicU64,
    instruct: AtomicU64,
}

impl AtomicOpCounts {
    fn snapshot(&self) -> OpCounts {
        OpCounts {
            score_tokens: self.score_tokens.load(Ordering::Relaxed),
            vocab_stats: self.vocab_stats.load(Ordering::Relaxed),
            generate: self.generate.load(Ordering::Relaxed),
            rewrite: self.rewrite.load(Ordering::Relaxed),
            instruct: self.instruct.load(Ordering::Relaxed),
        }
    }
}

#[derive(Default)]
struct Counters {
    /// Calls made against the handle, cache hits included. Deterministic
    /// for a fixed pipeline, so these are what the search trace records.
    logical: AtomicOpCounts,
    /// Calls that actually reached the backend (cache misses and retries).
    backend: AtomicOpCounts,
}

/// Bounds the number of in-flight backend calls across threads.
pub struct InFlightLimiter {
    permits: Mutex<usize>,
    available: Condvar,
}

impl InFlightLimiter {
    pub fn new(limit: usize) -> Self {
        InFlightLimiter {
            permits: Mutex::new(limit.max(1)),
            available: Condvar::new(),
        }
    }

    fn acquire(&self) -> LimiterGuard<'_> {
        let mut permits = self.permits.lock().unwrap();
        while *permits == 0 {
            permits = self.available.wait(permits).unwrap();
        }
        *permits -= 1;
        LimiterGuard { limiter: self }
    }
}

struct LimiterGuard<'a> {
    limiter: &'a InFlightLimiter,
}

impl Drop for LimiterGuard<'_> {
    fn drop(&mut self) {
        let mut permits = self.limiter.permits.lock().unwrap();
        *permits += 1;
        self.limiter.available.notify_one();
    }
}

pub const DEFAULT_IN_FLIGHT_LIMIT: usize = 8;

/// A capability-checked, cached, counted view of one backend. Cloning is
/// cheap and shares all state.
#[derive(Clone)]
pub struct ModelHandle {
    backend: Arc<dyn Backend>,
    cache: Option<Arc<ResponseCache>>,
    limiter: Arc<InFlightLimiter>,
    counters: Arc<Counters>,
}

impl ModelHandle {
    pub fn new(backend: Arc<dyn Backend>) -> Self {
        ModelHandle {
            backend,
            cache: None,
            limiter: Arc::new(InFlightLimiter::new(DEFAULT_IN_FLIGHT_LIMIT)),
            counters: Arc::new(Counters::default()),
        }
    }

    pub fn with_cache(mut self, cache: Arc<ResponseCache>) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn with_in_flight_limit(mut self, limit: usize) -> Self {
        self.limiter = Arc::new(InFlightLimiter::new(limit));
        self
    }

    pub fn kind(&self) -> BackendKind {
        self.backend.kind()
    }

    pub fn model_id(&self) -> &str {
        self.backend.model_id()
    }

    pub fn capabilities(&self) -> Capabilities {
        self.backend.capabilities()
    }

    /// Calls observed by the handle (cache hits included).
    pub fn logical_calls(&self) -> OpCounts {
        self.counters.logical.snapshot()
    }

    /// Calls that reached the backend itself.
    pub fn backend_calls(&self) -> OpCounts {
        self.counters.backend.snapshot()
    }

    fn require(&self, present: bool, capability: &'static str, operation: &'static str) -> Result<()> {
        if present {
            Ok(())
        } else {
            Err(Error::MissingCapability {
                model_id: self.model_id().to_string(),
                capability,
                operation,
            })
        }
    }

    fn cached<T, F>(&self, operation: &str, args: &impl Serialize, call: F) -> Result<T>
    where
        T: Serialize + serde::de::DeserializeOwned,
        F: Fn() -> Result<T>,
    {
        let run = || -> Result<T> {
            let _guard = self.limiter.acquire();
            call()
        };
        match &self.cache {
            None => run(),
            Some(cache) => {
                let key = cache_key(
                    self.kind().as_str(),
                    self.model_id(),
                    operation,
                    &serde_json::to_string(args)?,
                );
                if let Some(hit) = cache.get::<T>(&key)? {
                    return Ok(hit);
                }
                let value = run()?;
                cache.put(&key, self.kind().as_str(), self.model_id(), operation, &value)?;
                Ok(value)
            }
        }
    }

    /// Teacher-forced per-token log-probabilities of `text`, optionally
    /// conditioned on `prefix`. Only `text`'s tokens are returned.
    pub fn score_tokens(&self, text: &str, prefix: Option<&str>) -> Result<Vec<TokenScore>> {
        self.require(
            self.capabilities().token_logprobs,
            "token-logprobs",
            "score_tokens",
        )?;
        if text.trim().is_empty() {
            return Err(Error::Validation("score_tokens requires non-empty text".into()));
        }
        self.counters.logical.score_tokens.fetch_add(1, Ordering::Relaxed);
        self.cached("score_tokens", &(text, prefix), || {
            self.counters.backend.score_tokens.fetch_add(1, Ordering::Relaxed);
            self.backend.score_tokens(text, prefix)
        })
    }

    /// Per-position full-vocabulary log-probability statistics; requires
    /// the full-vocab-stats capability.
    pub fn vocab_stats(&self, text: &str, prefix: Option<&str>) -> Result<Vec<VocabStats>> {
        self.require(
            self.capabilities().full_vocab_stats,
            "full-vocab-stats",
            "vocab_stats",
        )?;
        if text.trim().is_empty() {
            return Err(Error::Validation("vocab_stats requires non-empty text".into()));
        }
        self.counters.logical.vocab_stats.fetch_add(1, Ordering::Relaxed);
        self.cached("vocab_stats", &(text, prefix), || {
            self.counters.backend.vocab_stats.fetch_add(1, Ordering::Relaxed);
            self.backend.vocab_stats(text, prefix)
        })
    }

    /// Greedy continuation of `prefix`.
    pub fn generate_continuation(&self, prefix: &str, max_tokens: usize) -> Result<Continuation> {
        self.require(
            self.capabilities().continuation,
            "continuation",
            "generate_continuation",
        )?;
        if max_tokens == 0 {
            return Err(Error::Validation("max_tokens must be at least 1".into()));
        }
        self.counters.logical.generate.fetch_add(1, Ordering::Relaxed);
        self.cached("generate_continuation", &(prefix, max_tokens), || {
            self.counters.backend.generate.fetch_add(1, Ordering::Relaxed);
            self.backend.generate(prefix, max_tokens)
        })
    }

    /// Rewrite `text` under `prompt`. An empty rewrite is retried once and
    /// then treated as a failure.
    pub fn rewrite(&self, prompt: &RewritePrompt, text: &str) -> Result<String> {
        self.require(self.capabilities().rewrite, "rewrite", "rewrite")?;
        self.counters.logical.rewrite.fetch_add(1, Ordering::Relaxed);
        let args = (prompt.content_hash(), text);
        self.cached("rewrite", &args, || {
            for _attempt in 0..2 {
                self.counters.backend.rewrite.fetch_add(1, Ordering::Relaxed);
                let out = self.backend.rewrite(prompt, text)?;
                if !out.trim().is_empty() {
                    return Ok(out);
                }
            }
            Err(Error::EmptyRewrite)
        })
    }

    /// Free-text instruction over materials. Same retry and cache contract
    /// as [`ModelHandle::rewrite`].
    pub fn instruct(&self, instruction: &str, materials: &[String]) -> Result<String> {
        self.require(self.capabilities().rewrite, "rewrite", "instruct")?;
        if materials.is_empty() {
            return Err(Error::Validation("instruct requires at least one material".into()));
        }
        self.counters.logical.instruct.fetch_add(1, Ordering::Relaxed);
        self.cached("instruct", &(instruction, materials), || {
            for _attempt in 0..2 {
                self.counters.backend.instruct.fetch_add(1, Ordering::Relaxed);
                let out = self.backend.instruct(instruction, materials)?;
                if !out.trim().is_empty() {
                    return Ok(out);
                }
            }
            Err(Error::EmptyRewrite)
        })
    }
}
