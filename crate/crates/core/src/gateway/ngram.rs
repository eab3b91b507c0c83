//! The deterministic n-gram memorizer that stands in for a fine-tuned
//! target model at desk scale.
//!
//! Probabilities are interpolated add-alpha estimates across all orders
//! `k <= order`:
//!
//! ```text
//! P(w | ctx) = sum_k  lambda_k * (count_k(ctx_k, w) + alpha) / (count_k(ctx_k) + alpha * |V|)
//! ```
//!
//! where `ctx_k` is the last `k-1` context tokens. Every per-order term is a
//! proper distribution over the vocabulary (training tokens plus `<unk>`),
//! so the mixture sums to 1 for every context and all log-probabilities are
//! finite for `alpha > 0`. An order-`k` term whose context window is not yet
//! available (fewer than `k-1` tokens seen and no prefix) falls back to the
//! uniform unseen-context estimate.
//!
//! Conditional scoring with a prefix additionally blends in a unigram cache
//! built from the prefix tokens, weighted by `prefix_cache_weight`. This
//! gives the simulator the long-range prefix sensitivity that conditional
//! log-likelihood detectors probe; unconditional scoring and greedy
//! generation never use the cache, so count-level oracles stay exact.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::TextSample;
use crate::error::{Error, Result};
use crate::gateway::tokenizer::{detokenize, tokenize};
use crate::gateway::{Continuation, TokenScore, VocabStats};

pub const UNK_TOKEN: &str = "<unk>";

/// Smoothing and interpolation parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothingParams {
    /// Add-alpha constant; must be positive for full-support distributions.
    pub alpha: f64,
    /// One weight per order, lowest order first; must sum to 1.
    pub interpolation_weights: Vec<f64>,
    /// Weight of the prefix unigram cache blended into conditional scoring.
    /// Zero makes conditional scoring ignore the prefix beyond the n-gram
    /// context window.
    pub prefix_cache_weight: f64,
}

impl SmoothingParams {
    /// The order-3 defaults: alpha 0.1, weights 0.05/0.15/0.8.
    pub fn default_for_order(order: usize) -> Self {
        let interpolation_weights = match order {
            1 => vec![1.0],
            2 => vec![0.15, 0.85],
            3 => vec![0.05, 0.15, 0.8],
            n => {
                // Highest order keeps 0.8, the remainder split evenly.
                let rest = 0.2 / (n - 1) as f64;
                let mut w = vec![rest; n - 1];
                w.push(0.8);
                w
            }
        };
        SmoothingParams {
            alpha: 0.1,
            interpolation_weights,
            prefix_cache_weight: 0.25,
        }
    }

    fn validate(&self, order: usize) -> Result<()> {
        if self.alpha < 0.0 {
            return Err(Error::Validation("alpha must be non-negative".into()));
        }
        if self.interpolation_weights.len() != order {
            return Err(Error::Validation(format!(
                "expected {order} interpolation weights, got {}",
                self.interpolation_weights.len()
            )));
        }
        let sum: f64 = self.interpolation_weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Validation(format!(
                "interpolation weights sum to {sum}, expected 1"
            )));
        }
        if !(0.0..=1.0).contains(&self.prefix_cache_weight) {
            return Err(Error::Validation(
                "prefix_cache_weight must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
struct ContextCounts {
    total: u64,
    // BTreeMap keeps successor iteration deterministic, which matters for
    // bit-reproducible float summation in the vocab statistics.
    successors: BTreeMap<u32, u64>,
}

/// Interpolated add-alpha n-gram model over the simulator tokenization.
#[derive(Debug, Clone)]
pub struct NgramMemorizer {
    order: usize,
    params: SmoothingParams,
    tokens: Vec<String>,
    index: HashMap<String, u32>,
    unk_id: u32,
    // counts[k-1] maps a (k-1)-token context to its successor counts.
    counts: Vec<HashMap<Vec<u32>, ContextCounts>>,
    fingerprint: String,
}

/// Train a memorizer on whole documents. Counts cover every k-gram
/// (k <= order) fully contained in a document; documents do not bleed into
/// each other. Deterministic: training twice on the same input yields an
/// identical model.
pub fn train_ngram(
    samples: &[TextSample],
    order: usize,
    params: SmoothingParams,
) -> Result<NgramMemorizer> {
    if samples.is_empty() {
        return Err(Error::Validation(
            "cannot train the memorizer on an empty sample list".into(),
        ));
    }
    if order == 0 {
        return Err(Error::Validation("order must be at least 1".into()));
    }
    params.validate(order)?;

    let mut model = NgramMemorizer::empty(order, params);
    let mut hasher = Sha256::new();
    hasher.update(order.to_le_bytes());
    for sample in samples {
        hasher.update(sample.id.as_bytes());
        hasher.update([0u8]);
        hasher.update(sample.text.as_bytes());
        hasher.update([0u8]);
        let ids: Vec<u32> = tokenize(&sample.text)
            .into_iter()
            .map(|t| model.intern(t))
            .collect();
        for k in 1..=order {
            if ids.len() < k {
                continue;
            }
            for window in ids.windows(k) {
                let (ctx, w) = window.split_at(k - 1);
                let entry = model.counts[k - 1]
                    .entry(ctx.to_vec())
                    .or_default();
                entry.total += 1;
                *entry.successors.entry(w[0]).or_insert(0) += 1;
            }
        }
    }
    model.seal();
    model.fingerprint = hex::encode(&hasher.finalize()[..6]);
    Ok(model)
}

impl NgramMemorizer {
    fn empty(order: usize, params: SmoothingParams) -> Self {
        NgramMemorizer {
            order,
            params,
            tokens: Vec::new(),
            index: HashMap::new(),
            unk_id: 0,
            counts: vec![HashMap::new(); order],
            fingerprint: String::new(),
        }
    }

    /// An untrained model over an explicit vocabulary: every conditional is
    /// exactly uniform at 1/|V|.
    pub fn uniform(vocabulary: &[&str], order: usize, params: SmoothingParams) -> Result<Self> {
        if vocabulary.is_empty() {
            return Err(Error::Validation("uniform model needs a vocabulary".into()));
        }
        params.validate(order)?;
        let mut model = NgramMemorizer::empty(order, params);
        for t in vocabulary {
            model.intern(t.to_string());
        }
        model.seal();
        model.fingerprint = "uniform".into();
        Ok(model)
    }

    fn intern(&mut self, token: String) -> u32 {
        if let Some(&id) = self.index.get(&token) {
            return id;
        }
        let id = self.tokens.len() as u32;
        self.index.insert(token.clone(), id);
        self.tokens.push(token);
        id
    }

    // The unknown token is appended last so greedy tie-breaks prefer real
    // training tokens.
    fn seal(&mut self) {
        self.unk_id = self.intern(UNK_TOKEN.to_string());
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Vocabulary size including the `<unk>` entry.
    pub fn vocab_size(&self) -> usize {
        self.tokens.len()
    }

    pub fn params(&self) -> &SmoothingParams {
        &self.params
    }

    /// Short content fingerprint of the training inputs; stable across runs.
    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    fn lookup(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(self.unk_id)
    }

    /// Per-order add-alpha conditional.
    fn order_prob(&self, k: usize, context: &[u32], w: u32) -> f64 {
        let v = self.vocab_size() as f64;
        let alpha = self.params.alpha;
        let ctx = &context[context.len() - (k - 1)..];
        match self.counts[k - 1].get(ctx) {
            Some(c) => {
                let cw = c.successors.get(&w).copied().unwrap_or(0) as f64;
                (cw + alpha) / (c.total as f64 + alpha * v)
            }
            None => 1.0 / v,
        }
    }

    /// Mixture conditional for one token given up to `order - 1` context
    /// tokens. Orders whose window exceeds the available context contribute
    /// the unseen-context uniform term.
    pub fn conditional(&self, context: &[u32], w: u32) -> f64 {
        let v = self.vocab_size() as f64;
        let mut p = 0.0;
        for k in 1..=self.order {
            let lambda = self.params.interpolation_weights[k - 1];
            let term = if context.len() >= k - 1 {
                self.order_prob(k, context, w)
            } else {
                1.0 / v
            };
            p += lambda * term;
        }
        p
    }

    /// Sparse view of the mixture distribution at a context: a floor value
    /// shared by all tokens without observed counts, plus per-token bumps
    /// for observed successors. `floor + bump(w)` is the exact probability.
    fn sparse_distribution(&self, context: &[u32]) -> (f64, BTreeMap<u32, f64>) {
        let v = self.vocab_size() as f64;
        let alpha = self.params.alpha;
        let mut floor = 0.0;
        let mut bumps: BTreeMap<u32, f64> = BTreeMap::new();
        for k in 1..=self.order {
            let lambda = self.params.interpolation_weights[k - 1];
            if context.len() < k - 1 {
                floor += lambda / v;
                continue;
            }
            let ctx = &context[context.len() - (k - 1)..];
            match self.counts[k - 1].get(ctx) {
                Some(c) => {
                    let denom = c.total as f64 + alpha * v;
                    floor += lambda * alpha / denom;
                    for (&w, &cw) in &c.successors {
                        *bumps.entry(w).or_insert(0.0) += lambda * cw as f64 / denom;
                    }
                }
                None => floor += lambda / v,
            }
        }
        (floor, bumps)
    }

    fn context_ids(&self, tokens: &[u32], position: usize, prefix: &[u32]) -> Vec<u32> {
        // Up to order-1 ids ending just before `position`, reaching back
        // into the prefix when the text does not supply enough history.
        let need = self.order - 1;
        let mut ctx = Vec::with_capacity(need);
        let from_text = position.min(need);
        let from_prefix = (need - from_text).min(prefix.len());
        ctx.extend_from_slice(&prefix[prefix.len() - from_prefix..]);
        ctx.extend_from_slice(&tokens[position - from_text..position]);
        ctx
    }

    fn prefix_cache(&self, prefix: &[u32]) -> Option<(f64, BTreeMap<u32, f64>)> {
        let gamma = self.params.prefix_cache_weight;
        if gamma == 0.0 || prefix.is_empty() {
            return None;
        }
        let v = self.vocab_size() as f64;
        let alpha = self.params.alpha.max(1e-12);
        let denom = prefix.len() as f64 + alpha * v;
        let mut counts: BTreeMap<u32, f64> = BTreeMap::new();
        for &id in prefix {
            *counts.entry(id).or_insert(0.0) += 1.0;
        }
        let floor = alpha / denom;
        let bumps = counts
            .into_iter()
            .map(|(id, c)| (id, c / denom))
            .collect();
        Some((floor, bumps))
    }

    /// Teacher-forced log-probabilities for every token of `text`. With a
    /// prefix, the context window reaches into the prefix and the prefix
    /// cache is blended in; only `text`'s tokens are scored either way.
    pub fn score(&self, text: &str, prefix: Option<&str>) -> Result<Vec<TokenScore>> {
        let tokens = tokenize(text);
        if tokens.is_empty() {
            return Err(Error::Validation(
                "tokenization produced zero tokens".into(),
            ));
        }
        let ids: Vec<u32> = tokens.iter().map(|t| self.lookup(t)).collect();
        let prefix_ids: Vec<u32> = prefix
            .map(|p| tokenize(p).iter().map(|t| self.lookup(t)).collect())
            .unwrap_or_default();
        let cache = self.prefix_cache(&prefix_ids);
        let gamma = self.params.prefix_cache_weight;

        let mut scores = Vec::with_capacity(ids.len());
        for (i, (&id, token)) in ids.iter().zip(&tokens).enumerate() {
            let ctx = self.context_ids(&ids, i, &prefix_ids);
            let mut p = self.conditional(&ctx, id);
            if let Some((floor, bumps)) = &cache {
                let q = floor + bumps.get(&id).copied().unwrap_or(0.0);
                p = (1.0 - gamma) * p + gamma * q;
            }
            scores.push(TokenScore {
                token: token.clone(),
                logprob: p.ln().min(0.0),
                top_alternatives: None,
            });
        }
        Ok(scores)
    }

    /// Per-position mean and population standard deviation of the full
    /// vocabulary's log-probabilities, matching the distributions used by
    /// [`NgramMemorizer::score`]. Exact via the sparse representation.
    pub fn vocab_stats(&self, text: &str, prefix: Option<&str>) -> Result<Vec<VocabStats>> {
        let tokens = tokenize(text);
        if tokens.is_empty() {
            return Err(Error::Validation(
                "tokenization produced zero tokens".into(),
            ));
        }
        let ids: Vec<u32> = tokens.iter().map(|t| self.lookup(t)).collect();
        let prefix_ids: Vec<u32> = prefix
            .map(|p| tokenize(p).iter().map(|t| self.lookup(t)).collect())
            .unwrap_or_default();
        let cache = self.prefix_cache(&prefix_ids);
        let gamma = self.params.prefix_cache_weight;
        let v = self.vocab_size() as f64;

        let mut out = Vec::with_capacity(ids.len());
        for i in 0..ids.len() {
            let ctx = self.context_ids(&ids, i, &prefix_ids);
            let (mut floor, mut bumps) = self.sparse_distribution(&ctx);
            if let Some((q_floor, q_bumps)) = &cache {
                floor = (1.0 - gamma) * floor + gamma * q_floor;
                let mut blended: BTreeMap<u32, f64> = BTreeMap::new();
                for (&w, &b) in &bumps {
                    *blended.entry(w).or_insert(0.0) += (1.0 - gamma) * b;
                }
                for (&w, &b) in q_bumps {
                    *blended.entry(w).or_insert(0.0) += gamma * b;
                }
                bumps = blended;
            }
            let ln_floor = floor.ln();
            let bumped = bumps.len() as f64;
            let mut sum = (v - bumped) * ln_floor;
            let mut sum_sq = (v - bumped) * ln_floor * ln_floor;
            for &b in bumps.values() {
                let lp = (floor + b).ln();
                sum += lp;
                sum_sq += lp * lp;
            }
            let mu = sum / v;
            let var = (sum_sq / v - mu * mu).max(0.0);
            out.push(VocabStats {
                mu,
                sigma: var.sqrt(),
            });
        }
        Ok(out)
    }

    /// Greedy decoding from a prefix. Ties break toward the smallest token
    /// id; the prefix cache is never consulted, so generation is a pure
    /// probe of the trained counts. `step_max_probs[i]` is the probability
    /// of the most probable token at step `i` given everything so far.
    pub fn generate(&self, prefix: &str, max_tokens: usize) -> Result<Continuation> {
        if max_tokens == 0 {
            return Err(Error::Validation("max_tokens must be at least 1".into()));
        }
        let mut history: Vec<u32> = tokenize(prefix).iter().map(|t| self.lookup(t)).collect();
        let mut generated = Vec::new();
        let mut step_max_probs = Vec::new();
        for _ in 0..max_tokens {
            let need = self.order.saturating_sub(1);
            let start = history.len().saturating_sub(need);
            let ctx = history[start..].to_vec();
            let (floor, bumps) = self.sparse_distribution(&ctx);
            let (best_id, best_p) = match bumps
                .iter()
                .map(|(&w, &b)| (w, floor + b))
                .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(b.0.cmp(&a.0)))
            {
                Some((w, p)) if p > floor => (w, p),
                // No observed successor beats the floor: every token ties,
                // so the smallest id wins.
                _ => (0, floor),
            };
            history.push(best_id);
            generated.push(self.tokens[best_id as usize].clone());
            step_max_probs.push(best_p);
        }
        Ok(Continuation {
            text: detokenize(&generated),
            step_max_probs,
        })
    }
}

/// [`crate::gateway::Backend`] wrapper for a trained memorizer. The model
/// id embeds a fingerprint of the training inputs so cache keys separate
/// differently trained simulators.
pub struct NgramBackend {
    memorizer: NgramMemorizer,
    model_id: String,
}

impl NgramBackend {
    pub fn new(memorizer: NgramMemorizer) -> Self {
        let model_id = format!(
            "ngram-o{}-{}",
            memorizer.order(),
            memorizer.fingerprint()
        );
        NgramBackend {
            memorizer,
            model_id,
        }
    }

    pub fn memorizer(&self) -> &NgramMemorizer {
        &self.memorizer
    }
}

impl crate::gateway::Backend for NgramBackend {
    fn kind(&self) -> crate::gateway::BackendKind {
        crate::gateway::BackendKind::NgramSim
    }

    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn capabilities(&self) -> crate::gateway::Capabilities {
        crate::gateway::Capabilities {
            token_logprobs: true,
            full_vocab_stats: true,
            continuation: true,
            rewrite: false,
        }
    }

    fn score_tokens(&self, text: &str, prefix: Option<&str>) -> Result<Vec<TokenScore>> {
        self.memorizer.score(text, prefix)
    }

    fn vocab_stats(&self, text: &str, prefix: Option<&str>) -> Result<Vec<VocabStats>> {
        self.memorizer.vocab_stats(text, prefix)
    }

    fn generate(&self, prefix: &str, max_tokens: usize) -> Result<Continuation> {
        self.memorizer.generate(prefix, max_tokens)
    }

    fn rewrite(&self, _prompt: &crate::prompt::RewritePrompt, _text: &str) -> Result<String> {
        Err(Error::MissingCapability {
            model_id: self.model_id.clone(),
            capability: "rewrite",
            operation: "rewrite",
        })
    }

    fn instruct(&self, _instruction: &str, _materials: &[String]) -> Result<String> {
        Err(Error::MissingCapability {
            model_id: self.model_id.clone(),
            capability: "rewrite",
            operation: "instruct",
        })
    }
}
