//! Stage 1: identify which register the laundering transformation most
//! likely targeted.
//!
//! For every register the auxiliary model provides a standard rewrite
//! prompt and an opening template extracted from sample rewrites. Each
//! template is instantiated on first sentences of candidate texts and fed
//! to the target model; registers whose openings elicit the most confident
//! continuations are shortlisted, and the shortlist is resolved by full
//! synthesize-and-detect runs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{first_sentence, uniform_sample, CorpusSplit, TextSample};
use crate::detectors::{run_detector, DetectorHandles};
use crate::error::{Error, Result};
use crate::gateway::scripted::{
    FILL_INSTRUCTION_PREFIX, PROMPT_REQUEST_PREFIX, TEMPLATE_EXTRACT_INSTRUCTION,
};
use crate::gateway::ModelHandle;
use crate::metrics::{evaluate, DetectionReport};
use crate::prompt::RewritePrompt;
use crate::registers::{self, OpeningTemplate, Register};
use crate::search::SearchConfig;
use crate::seeding::subseed;

/// One register's continuation-confidence outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegisterConfEntry {
    pub register_id: u8,
    pub abbreviation: String,
    pub conf: f64,
    pub skipped_samples: usize,
}

/// One shortlisted register's detection outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub register_id: u8,
    pub perf: f64,
}

/// Everything stage 1 produces.
#[derive(Debug, Clone)]
pub struct StageOneOutcome {
    pub register: Register,
    pub prompt: RewritePrompt,
    pub report: DetectionReport,
    pub conf: Vec<RegisterConfEntry>,
    pub shortlist: Vec<u8>,
    pub candidates: Vec<(u8, DetectionReport)>,
    /// Registers dropped along the way (prompt/template/confidence or
    /// synthesis failures), with the failing stage.
    pub dropped: Vec<(u8, String)>,
}

/// One generation-0 prompt per register, via the auxiliary model. Registers
/// whose request fails are dropped (and reported); at least one register
/// must survive.
pub fn build_standard_prompts(
    aux: &ModelHandle,
) -> Result<(BTreeMap<u8, RewritePrompt>, Vec<(u8, String)>)> {
    let mut prompts = BTreeMap::new();
    let mut dropped = Vec::new();
    for register in registers::catalog() {
        let instruction = format!("{PROMPT_REQUEST_PREFIX}{}", register.name);
        match aux.instruct(&instruction, &[register.name.to_string()]) {
            Ok(text) => {
                prompts.insert(register.id, RewritePrompt::standard(text, Some(register.id)));
            }
            Err(e) => {
                log::warn!("standard prompt for register {} failed: {e}", register.id);
                dropped.push((register.id, format!("standard prompt: {e}")));
            }
        }
    }
    if prompts.is_empty() {
        return Err(Error::Search(
            "no register yielded a standard prompt".into(),
        ));
    }
    Ok((prompts, dropped))
}

/// Rewrite `n` sampled candidate texts with the register's standard prompt,
/// keep each rewrite's first sentence, and ask the auxiliary model for a
/// common template. Falls back to the register's fixture template whenever
/// extraction fails or produces no placeholder.
pub fn build_opening_template(
    aux: &ModelHandle,
    register: Register,
    standard_prompt: &RewritePrompt,
    pro: &[TextSample],
    cfg: &SearchConfig,
) -> Result<OpeningTemplate> {
    if cfg.n == 0 {
        return Err(Error::Validation(
            "template construction needs n >= 1 samples".into(),
        ));
    }
    let samples = uniform_sample(pro, cfg.n, subseed(cfg.seed, "template", register.id as u64))?;
    let fallback = || {
        registers::fixture_template(register.id).ok_or_else(|| {
            Error::Search(format!(
                "template extraction failed for register {} and no fixture exists",
                register.id
            ))
        })
    };

    let mut openings = Vec::with_capacity(samples.len());
    for sample in &samples {
        match aux.rewrite(standard_prompt, &sample.text) {
            Ok(rewrite) => openings.push(first_sentence(&rewrite).to_string()),
            Err(e) => log::warn!(
                "template rewrite failed for register {} on '{}': {e}",
                register.id,
                sample.id
            ),
        }
    }
    if openings.is_empty() {
        return fallback();
    }
    match aux.instruct(TEMPLATE_EXTRACT_INSTRUCTION, &openings) {
        Ok(text) => match OpeningTemplate::new(register.id, text) {
            Ok(template) => Ok(template),
            Err(e) => {
                log::warn!("extracted template invalid for register {}: {e}", register.id);
                fallback()
            }
        },
        Err(e) => {
            log::warn!("template extraction failed for register {}: {e}", register.id);
            fallback()
        }
    }
}

/// The instruction handed to the auxiliary model to instantiate a template
/// on one text; recorded in the search trace.
pub fn fill_instruction(template: &OpeningTemplate) -> String {
    format!("{FILL_INSTRUCTION_PREFIX}{}", template.template_text)
}

/// Average continuation confidence of the target model after
/// register-templated openings: rewrite `m` sampled first sentences into
/// the template form, greedily continue each, average the per-step maximum
/// next-token probabilities per sample, then across samples. Samples whose
/// continuation is empty are skipped; if every sample is skipped the
/// register has no confidence estimate.
pub fn register_confidence(
    target: &ModelHandle,
    aux: &ModelHandle,
    register: Register,
    template: &OpeningTemplate,
    pro: &[TextSample],
    cfg: &SearchConfig,
) -> Result<(f64, usize)> {
    if cfg.m == 0 {
        return Err(Error::Validation(
            "confidence scoring needs m >= 1 samples".into(),
        ));
    }
    let samples = uniform_sample(pro, cfg.m, subseed(cfg.seed, "conf", register.id as u64))?;
    let instruction = fill_instruction(template);
    let mut per_sample = Vec::with_capacity(samples.len());
    let mut skipped = 0usize;
    for sample in &samples {
        let opening_source = first_sentence(&sample.text).to_string();
        let opening = aux.instruct(&instruction, &[opening_source])?;
        let continuation = target.generate_continuation(&opening, cfg.max_continuation_tokens)?;
        if continuation.step_max_probs.is_empty() {
            log::warn!(
                "empty continuation for register {} on sample '{}'",
                register.id,
                sample.id
            );
            skipped += 1;
            continue;
        }
        let sample_conf = continuation.step_max_probs.iter().sum::<f64>()
            / continuation.step_max_probs.len() as f64;
        per_sample.push(sample_conf);
    }
    if per_sample.is_empty() {
        return Err(Error::Search(format!(
            "all confidence samples skipped for register {}",
            register.id
        )));
    }
    Ok((
        per_sample.iter().sum::<f64>() / per_sample.len() as f64,
        skipped,
    ))
}

/// Top-k registers by confidence, descending; ties break toward the
/// smaller register id. Clamps to the available registers.
pub fn shortlist(conf: &[RegisterConfEntry], top_k: usize) -> Vec<u8> {
    let mut ranked: Vec<&RegisterConfEntry> = conf.iter().collect();
    ranked.sort_by(|a, b| {
        b.conf
            .partial_cmp(&a.conf)
            .expect("confidence values are finite")
            .then(a.register_id.cmp(&b.register_id))
    });
    ranked
        .into_iter()
        .take(top_k)
        .map(|e| e.register_id)
        .collect()
}

/// Evaluation split for stage-1 candidate resolution: the full corpora by
/// default, or a seeded subsample when the budget knob is set.
fn stage1_split(split: &CorpusSplit, cfg: &SearchConfig) -> Result<CorpusSplit> {
    match cfg.stage1_subsample {
        None => Ok(split.clone()),
        Some(size) => {
            let pro_n = size.min(split.pro.len()).max(1);
            let held_n = size.min(split.held.len()).max(1);
            CorpusSplit::new(
                uniform_sample(&split.pro, pro_n, subseed(cfg.seed, "stage1-pro", 0))?,
                uniform_sample(&split.held, held_n, subseed(cfg.seed, "stage1-held", 0))?,
            )
        }
    }
}

/// Resolve the shortlist: synthesize the full candidate and held corpora
/// under each register's standard prompt, run the configured detector, and
/// return the best register by detection performance (ties toward the
/// smaller id). Candidates whose synthesis fails are disqualified and
/// logged; losing every candidate is an error.
#[allow(clippy::type_complexity)]
pub fn select_register(
    candidates: &[u8],
    prompts: &BTreeMap<u8, RewritePrompt>,
    handles: &DetectorHandles,
    split: &CorpusSplit,
    cfg: &SearchConfig,
) -> Result<(u8, RewritePrompt, DetectionReport, Vec<(u8, DetectionReport)>, Vec<(u8, String)>)> {
    if candidates.is_empty() {
        return Err(Error::Search("no candidate registers to select from".into()));
    }
    let eval_split = stage1_split(split, cfg)?;
    let detector_cfg = cfg.detector_cfg();
    let mut reports: Vec<(u8, DetectionReport)> = Vec::new();
    let mut dropped = Vec::new();
    for &id in candidates {
        let Some(prompt) = prompts.get(&id) else {
            dropped.push((id, "no standard prompt".to_string()));
            continue;
        };
        match run_detector(cfg.detector, handles, &eval_split, Some(prompt), &detector_cfg) {
            Ok(vector) => {
                let report = evaluate(
                    cfg.detector.as_str(),
                    &vector.member_scores,
                    &vector.nonmember_scores,
                    &cfg.fpr_levels,
                    cfg.objective,
                )?;
                reports.push((id, report));
            }
            Err(e) => {
                log::warn!("candidate register {id} disqualified: {e}");
                dropped.push((id, format!("synthesis/detection: {e}")));
            }
        }
    }
    let best = reports
        .iter()
        .max_by(|a, b| {
            a.1.perf
                .partial_cmp(&b.1.perf)
                .expect("perf values are finite")
                .then(b.0.cmp(&a.0))
        })
        .cloned();
    match best {
        Some((id, report)) => {
            let prompt = prompts.get(&id).expect("winner had a prompt").clone();
            Ok((id, prompt, report, reports, dropped))
        }
        None => Err(Error::Search(
            "every candidate register was disqualified".into(),
        )),
    }
}

/// The full stage-1 pass.
pub fn run_stage_one(
    handles: &DetectorHandles,
    split: &CorpusSplit,
    cfg: &SearchConfig,
) -> Result<StageOneOutcome> {
    let aux = handles
        .auxiliary
        .as_ref()
        .ok_or_else(|| Error::Config("stage 1 requires an auxiliary backend".into()))?;
    let (prompts, mut dropped) = build_standard_prompts(aux)?;

    let mut conf_entries = Vec::new();
    for register in registers::catalog() {
        let Some(prompt) = prompts.get(&register.id) else {
            continue;
        };
        let template = match build_opening_template(aux, register, prompt, &split.pro, cfg) {
            Ok(t) => t,
            Err(e) => {
                log::warn!("register {} dropped at template stage: {e}", register.id);
                dropped.push((register.id, format!("template: {e}")));
                continue;
            }
        };
        match register_confidence(&handles.target, aux, register, &template, &split.pro, cfg) {
            Ok((conf, skipped)) => conf_entries.push(RegisterConfEntry {
                register_id: register.id,
                abbreviation: register.abbreviation.to_string(),
                conf,
                skipped_samples: skipped,
            }),
            Err(e) => {
                log::warn!("register {} dropped at confidence stage: {e}", register.id);
                dropped.push((register.id, format!("confidence: {e}")));
            }
        }
    }
    if conf_entries.is_empty() {
        return Err(Error::Search("no register produced a confidence score".into()));
    }

    let shortlisted = shortlist(&conf_entries, cfg.top_k);
    let (register_id, prompt, report, candidates, select_dropped) =
        select_register(&shortlisted, &prompts, handles, split, cfg)?;
    dropped.extend(select_dropped);

    Ok(StageOneOutcome {
        register: registers::by_id(register_id).expect("selected register exists"),
        prompt,
        report,
        conf: conf_entries,
        shortlist: shortlisted,
        candidates,
        dropped,
    })
}
