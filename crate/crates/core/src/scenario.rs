//! Synthetic end-to-end scenarios: scripted laundering plus an n-gram
//! memorizer target, the desk-scale stand-in for fine-tuning a model on
//! laundered data.
//!
//! A scenario generates a deterministic corpus, launders the candidate half
//! with the scripted transform for a chosen register (optionally plus a
//! detail rule), trains the memorizer on the laundered member half, and
//! hands back ready-to-audit handles together with machine-checkable
//! ground truth.
//!
//! Corpus documents mix shared-pool content words with common function
//! words at a per-document ratio drawn from a configurable range. The
//! shared pool keeps vocabulary-level signals flat (originals of laundered
//! members score like non-members), while the ratio spread gives
//! per-document likelihoods enough variance that partially matched
//! surrogates land at intermediate detection performance instead of
//! saturating.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusSplit, TextSample};
use crate::detectors::DetectorHandles;
use crate::error::{Error, Result};
use crate::gateway::ngram::{train_ngram, NgramBackend, SmoothingParams};
use crate::gateway::scripted::{append_detail, scripted_transform, DetailRule, ScriptedAux};
use crate::gateway::ModelHandle;
use crate::prompt::RewritePrompt;
use crate::registers;
use crate::seeding::subseed;
use std::sync::Arc;

/// Deterministic corpus generator parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusGenConfig {
    pub pro: usize,
    pub held: usize,
    pub sentences_min: usize,
    pub sentences_max: usize,
    pub words_min: usize,
    pub words_max: usize,
    /// Per-document share of common function words, drawn uniformly from
    /// this range. A wide range spreads per-document likelihoods.
    pub common_ratio_min: f64,
    pub common_ratio_max: f64,
    /// Number of distinct content words shared by all documents.
    pub pool_size: usize,
}

impl Default for CorpusGenConfig {
    fn default() -> Self {
        CorpusGenConfig {
            pro: 100,
            held: 100,
            sentences_min: 3,
            sentences_max: 5,
            words_min: 8,
            words_max: 14,
            common_ratio_min: 0.05,
            common_ratio_max: 0.85,
            pool_size: 900,
        }
    }
}

/// Full specification of one synthetic scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub true_register_id: u8,
    pub extra_detail_rule: Option<DetailRule>,
    /// Fraction of the member half that is laundered before training; the
    /// rest enters the training set verbatim.
    pub laundering_fraction: f64,
    /// Train the memorizer on laundered *disjoint* documents instead, so
    /// no candidate text influences it in any form.
    pub negative_control: bool,
    pub memorizer_order: usize,
    pub memorizer_alpha: f64,
    /// Per-order interpolation weights; defaults for the order when absent.
    pub interpolation_weights: Option<Vec<f64>>,
    pub prefix_cache_weight: f64,
    pub seed: u64,
    pub corpus: CorpusGenConfig,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        ScenarioSpec {
            true_register_id: 1,
            extra_detail_rule: None,
            laundering_fraction: 1.0,
            negative_control: false,
            memorizer_order: 3,
            memorizer_alpha: 0.1,
            interpolation_weights: None,
            prefix_cache_weight: 0.25,
            seed: 0,
            corpus: CorpusGenConfig::default(),
        }
    }
}

/// What the harness knows that the auditor does not.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub register_id: u8,
    pub detail_rule: Option<DetailRule>,
    /// The exact laundering prompt (standard prompt plus detail clauses).
    pub true_prompt: RewritePrompt,
    /// Ids of candidate documents whose laundered variant entered
    /// training.
    pub laundered_member_ids: Vec<String>,
    /// Ids of all training documents, in training order.
    pub training_ids: Vec<String>,
}

/// A ready-to-audit synthetic world.
pub struct Scenario {
    pub split: CorpusSplit,
    pub handles: DetectorHandles,
    pub ground_truth: GroundTruth,
}

const CONSONANTS: &[u8] = b"bdfglmnprstvz";
const VOWELS: &[u8] = b"aeiou";

const COMMON_WORDS: &[&str] = &[
    "the", "of", "and", "a", "to", "in", "is", "it", "for", "as", "on", "with", "at", "by",
    "an", "be", "this", "that", "from", "or", "was", "are", "will", "its", "but",
];

fn gen_word(rng: &mut ChaCha8Rng, region: Option<char>) -> String {
    let syllables = rng.gen_range(2..=3);
    let mut word = String::new();
    if let Some(r) = region {
        word.push(r);
    }
    for _ in 0..syllables {
        word.push(CONSONANTS[rng.gen_range(0..CONSONANTS.len())] as char);
        word.push(VOWELS[rng.gen_range(0..VOWELS.len())] as char);
    }
    word
}

fn build_pool(cfg: &CorpusGenConfig, seed: u64, region: Option<char>) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(subseed(seed, "pool", 0));
    let mut pool = Vec::with_capacity(cfg.pool_size);
    let mut seen = std::collections::HashSet::new();
    while pool.len() < cfg.pool_size {
        let word = gen_word(&mut rng, region);
        if seen.insert(word.clone()) {
            pool.push(word);
        }
    }
    pool
}

// Deals content words by cycling through a shuffled pool, reshuffling after
// each pass. Documents from one stream collectively cover the entire pool,
// so a corpus half large enough to exhaust one pass leaves no word of the
// other half out-of-vocabulary for a model trained on it.
struct PoolCycle<'a> {
    pool: &'a [String],
    order: Vec<usize>,
    cursor: usize,
    rng: ChaCha8Rng,
}

impl<'a> PoolCycle<'a> {
    fn new(pool: &'a [String], seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..pool.len()).collect();
        use rand::seq::SliceRandom;
        order.shuffle(&mut rng);
        PoolCycle {
            pool,
            order,
            cursor: 0,
            rng,
        }
    }

    fn next_word(&mut self) -> &'a str {
        if self.cursor == self.order.len() {
            use rand::seq::SliceRandom;
            self.order.shuffle(&mut self.rng);
            self.cursor = 0;
        }
        let word = &self.pool[self.order[self.cursor]];
        self.cursor += 1;
        word
    }
}

// First sentences must carry enough content words to fill any opening
// template's placeholders.
const FIRST_SENTENCE_MIN_CONTENT: usize = 7;

/// Generate `count` deterministic documents over a shared content pool.
/// `id_prefix` separates document streams that share a pool; `region`
/// shifts the pool into a disjoint vocabulary (regions use letters the
/// default alphabet never produces in first position).
pub fn synthetic_corpus(
    cfg: &CorpusGenConfig,
    count: usize,
    seed: u64,
    id_prefix: &str,
    region: Option<char>,
) -> Vec<TextSample> {
    let pool = build_pool(cfg, seed, region);
    let mut cycle = PoolCycle::new(&pool, subseed(seed, &format!("cycle-{id_prefix}"), 0));
    let mut docs = Vec::with_capacity(count);
    for i in 0..count {
        let mut rng = ChaCha8Rng::seed_from_u64(subseed(
            seed,
            &format!("doc-{id_prefix}"),
            i as u64,
        ));
        let common_ratio = rng.gen_range(cfg.common_ratio_min..=cfg.common_ratio_max);
        let sentences = rng.gen_range(cfg.sentences_min..=cfg.sentences_max);
        let mut text = String::new();
        for s in 0..sentences {
            let mut len = rng.gen_range(cfg.words_min..=cfg.words_max);
            if s == 0 {
                len = len.max(FIRST_SENTENCE_MIN_CONTENT + 3);
            }
            let mut words: Vec<&str> = Vec::with_capacity(len);
            for _ in 0..len {
                if rng.gen_bool(common_ratio) {
                    words.push(COMMON_WORDS[rng.gen_range(0..COMMON_WORDS.len())]);
                } else {
                    words.push(cycle.next_word());
                }
            }
            if s == 0 {
                // Top up content words from the front so template fills are
                // well supplied.
                let mut content = words
                    .iter()
                    .filter(|w| !COMMON_WORDS.contains(w))
                    .count();
                for slot in 0..words.len() {
                    if content >= FIRST_SENTENCE_MIN_CONTENT {
                        break;
                    }
                    if COMMON_WORDS.contains(&words[slot]) {
                        words[slot] = cycle.next_word();
                        content += 1;
                    }
                }
            }
            if !text.is_empty() {
                text.push(' ');
            }
            text.push_str(&words.join(" "));
            text.push('.');
        }
        docs.push(
            TextSample::new(format!("{id_prefix}-{i:04}"), &text, "synthetic")
                .expect("generated documents are non-empty"),
        );
    }
    docs
}

fn detail_slice(rule: &Option<DetailRule>) -> Vec<DetailRule> {
    rule.iter().copied().collect()
}

/// The exact prompt the scripted launderer executes for a spec.
pub fn true_prompt(spec: &ScenarioSpec) -> Result<RewritePrompt> {
    let base = registers::fixture_standard_prompt_text(spec.true_register_id)
        .ok_or_else(|| Error::Config(format!("unknown register id {}", spec.true_register_id)))?;
    let mut text = base.to_string();
    if let Some(rule) = spec.extra_detail_rule {
        text = append_detail(&text, rule);
    }
    Ok(RewritePrompt::standard(text, Some(spec.true_register_id)))
}

/// Build the synthetic world for a spec: generate (or accept) the corpus,
/// launder, train the memorizer, and wire up handles.
pub fn build_scenario(spec: &ScenarioSpec, corpus: Option<CorpusSplit>) -> Result<Scenario> {
    if !(spec.laundering_fraction > 0.0 && spec.laundering_fraction <= 1.0) {
        return Err(Error::Config(format!(
            "laundering_fraction must lie in (0, 1], got {}",
            spec.laundering_fraction
        )));
    }
    if registers::by_id(spec.true_register_id).is_none() {
        return Err(Error::Config(format!(
            "unknown register id {}",
            spec.true_register_id
        )));
    }
    if spec.memorizer_order == 0 {
        return Err(Error::Config("memorizer order must be at least 1".into()));
    }

    let split = match corpus {
        Some(split) => {
            if split.pro.len() < 2 || split.held.len() < 2 {
                return Err(Error::Config(
                    "scenario corpus too small: need at least 2 samples per half".into(),
                ));
            }
            split
        }
        None => {
            let pro = synthetic_corpus(&spec.corpus, spec.corpus.pro, spec.seed, "pro", None);
            let held = synthetic_corpus(&spec.corpus, spec.corpus.held, spec.seed, "held", None);
            CorpusSplit::new(pro, held)?
        }
    };

    let details = detail_slice(&spec.extra_detail_rule);
    let launder = |sample: &TextSample, tag: &str| -> TextSample {
        TextSample::new(
            format!("{}-{tag}", sample.id),
            &scripted_transform(spec.true_register_id, &details, &sample.text),
            "laundered",
        )
        .expect("laundered text is non-empty")
    };

    let (training, laundered_member_ids): (Vec<TextSample>, Vec<String>) = if spec.negative_control
    {
        // Disjoint documents from the same pool: the register scaffolding
        // is trained, no candidate content is.
        let extra = synthetic_corpus(&spec.corpus, spec.corpus.pro, spec.seed, "neg", None);
        (extra.iter().map(|s| launder(s, "laundered")).collect(), Vec::new())
    } else {
        let laundered_count = ((spec.laundering_fraction * split.pro.len() as f64).round()
            as usize)
            .clamp(1, split.pro.len());
        let chosen = crate::corpus::uniform_sample(
            &split.pro,
            laundered_count,
            subseed(spec.seed, "laundered", 0),
        )?;
        let chosen_ids: std::collections::HashSet<&str> =
            chosen.iter().map(|s| s.id.as_str()).collect();
        let mut training = Vec::with_capacity(split.pro.len());
        for sample in &split.pro {
            if chosen_ids.contains(sample.id.as_str()) {
                training.push(launder(sample, "laundered"));
            } else {
                training.push(sample.clone());
            }
        }
        let mut ids: Vec<String> = chosen.iter().map(|s| s.id.clone()).collect();
        ids.sort();
        (training, ids)
    };

    let weights = spec
        .interpolation_weights
        .clone()
        .unwrap_or_else(|| SmoothingParams::default_for_order(spec.memorizer_order).interpolation_weights);
    let params = SmoothingParams {
        alpha: spec.memorizer_alpha,
        interpolation_weights: weights,
        prefix_cache_weight: spec.prefix_cache_weight,
    };
    let memorizer = train_ngram(&training, spec.memorizer_order, params)?;
    let target = ModelHandle::new(Arc::new(NgramBackend::new(memorizer)));

    // Reference model: an order-1 memorizer over unrelated text (its own
    // seed, hence its own pool).
    let reference_docs = synthetic_corpus(
        &CorpusGenConfig {
            pro: 20,
            held: 0,
            ..spec.corpus.clone()
        },
        20,
        subseed(spec.seed, "reference", 0),
        "ref",
        None,
    );
    let reference_params = SmoothingParams {
        alpha: 0.1,
        interpolation_weights: vec![1.0],
        prefix_cache_weight: 0.0,
    };
    let reference_model = train_ngram(&reference_docs, 1, reference_params)?;
    let reference = ModelHandle::new(Arc::new(NgramBackend::new(reference_model)));

    let auxiliary = ModelHandle::new(Arc::new(ScriptedAux::new()));

    let ground_truth = GroundTruth {
        register_id: spec.true_register_id,
        detail_rule: spec.extra_detail_rule,
        true_prompt: true_prompt(spec)?,
        laundered_member_ids,
        training_ids: training.iter().map(|s| s.id.clone()).collect(),
    };

    Ok(Scenario {
        split,
        handles: DetectorHandles {
            target,
            reference: Some(reference),
            auxiliary: Some(auxiliary),
        },
        ground_truth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::tokenizer::tokenize;

    fn small_spec() -> ScenarioSpec {
        ScenarioSpec {
            corpus: CorpusGenConfig {
                pro: 12,
                held: 12,
                ..CorpusGenConfig::default()
            },
            seed: 11,
            ..ScenarioSpec::default()
        }
    }

    #[test]
    fn corpus_generation_is_deterministic() {
        let cfg = CorpusGenConfig::default();
        let a = synthetic_corpus(&cfg, 5, 42, "pro", None);
        let b = synthetic_corpus(&cfg, 5, 42, "pro", None);
        assert_eq!(a, b);
        let c = synthetic_corpus(&cfg, 5, 43, "pro", None);
        assert_ne!(a, c);
    }

    #[test]
    fn regions_have_disjoint_content_vocabularies() {
        let cfg = CorpusGenConfig::default();
        let plain = synthetic_corpus(&cfg, 5, 42, "a", None);
        let shifted = synthetic_corpus(&cfg, 5, 42, "b", Some('q'));
        let words = |docs: &[TextSample]| -> std::collections::HashSet<String> {
            docs.iter()
                .flat_map(|d| tokenize(&d.text))
                .filter(|t| t.len() >= 4 && !COMMON_WORDS.contains(&t.as_str()))
                .collect()
        };
        let a = words(&plain);
        let b = words(&shifted);
        assert!(a.is_disjoint(&b));
    }

    #[test]
    fn first_sentences_carry_enough_content_words() {
        let cfg = CorpusGenConfig::default();
        for doc in synthetic_corpus(&cfg, 30, 7, "pro", None) {
            let first = crate::corpus::first_sentence(&doc.text);
            let content = crate::gateway::scripted::content_words(first);
            assert!(
                content.len() >= FIRST_SENTENCE_MIN_CONTENT,
                "doc {} first sentence has only {} content words",
                doc.id,
                content.len()
            );
        }
    }

    #[test]
    fn full_laundering_trains_on_laundered_texts_only() {
        let scenario = build_scenario(&small_spec(), None).unwrap();
        assert_eq!(scenario.ground_truth.training_ids.len(), 12);
        assert!(scenario
            .ground_truth
            .training_ids
            .iter()
            .all(|id| id.ends_with("-laundered")));
        assert_eq!(scenario.ground_truth.laundered_member_ids.len(), 12);
    }

    #[test]
    fn laundered_training_texts_open_with_the_register_pattern() {
        let spec = small_spec();
        let scenario = build_scenario(&spec, None).unwrap();
        // Rebuild the training texts the scenario constructed and check
        // every laundered one starts with the lyrical opening.
        for sample in &scenario.split.pro {
            let laundered = scripted_transform(1, &[], &sample.text);
            assert!(laundered.starts_with("In the heart of "));
        }
        assert_eq!(scenario.ground_truth.register_id, 1);
    }

    #[test]
    fn partial_laundering_splits_training_exactly() {
        let spec = ScenarioSpec {
            laundering_fraction: 0.5,
            ..small_spec()
        };
        let scenario = build_scenario(&spec, None).unwrap();
        assert_eq!(scenario.ground_truth.laundered_member_ids.len(), 6);
        let laundered = scenario
            .ground_truth
            .training_ids
            .iter()
            .filter(|id| id.ends_with("-laundered"))
            .count();
        assert_eq!(laundered, 6);
        let verbatim = scenario.ground_truth.training_ids.len() - laundered;
        assert_eq!(verbatim, 6);
    }

    #[test]
    fn negative_control_shares_no_document_with_the_candidates() {
        let spec = ScenarioSpec {
            negative_control: true,
            ..small_spec()
        };
        let scenario = build_scenario(&spec, None).unwrap();
        assert!(scenario.ground_truth.laundered_member_ids.is_empty());
        let pro_ids: std::collections::HashSet<&str> = scenario
            .split
            .pro
            .iter()
            .map(|s| s.id.as_str())
            .collect();
        for id in &scenario.ground_truth.training_ids {
            let base = id.trim_end_matches("-laundered");
            assert!(!pro_ids.contains(base), "training doc {id} overlaps pro");
        }
    }

    #[test]
    fn scenario_construction_is_deterministic() {
        let spec = small_spec();
        let a = build_scenario(&spec, None).unwrap();
        let b = build_scenario(&spec, None).unwrap();
        assert_eq!(a.ground_truth, b.ground_truth);
        assert_eq!(a.split.pro, b.split.pro);
        assert_eq!(a.handles.target.model_id(), b.handles.target.model_id());
    }

    #[test]
    fn true_prompt_reflects_the_detail_rule() {
        let spec = ScenarioSpec {
            extra_detail_rule: Some(DetailRule::VividImagery),
            ..small_spec()
        };
        let p = true_prompt(&spec).unwrap();
        assert!(p.text.contains("imagery is vivid"));
        assert_eq!(p.register_id, Some(1));
        assert_eq!(p.generation, 0);
    }

    #[test]
    fn rejects_bad_fractions() {
        let spec = ScenarioSpec {
            laundering_fraction: 0.0,
            ..small_spec()
        };
        assert!(build_scenario(&spec, None).is_err());
    }
}
