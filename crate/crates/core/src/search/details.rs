//! Stage 2: iteratively infer the fine-grained details of the laundering
//! transformation.
//!
//! Each iteration rewrites a few candidate texts under the incumbent
//! prompt, lets the target model continue each rewrite's first sentence
//! (a memorized opening reactivates memorized continuations), asks the
//! auxiliary model what prompt edit would reconcile the two, distills the
//! per-sample answers into one refined prompt, and accepts the refinement
//! only on a strict detection-performance improvement.

use serde::{Deserialize, Serialize};

use crate::corpus::{first_sentence, uniform_sample, CorpusSplit, TextSample};
use crate::detectors::{run_detector, DetectorHandles};
use crate::error::{Error, Result};
use crate::gateway::scripted::{EDIT_INSTRUCTION, PROMPT_EXTRACT_INSTRUCTION};
use crate::gateway::ModelHandle;
use crate::metrics::{evaluate, DetectionReport};
use crate::prompt::RewritePrompt;
use crate::search::SearchConfig;
use crate::seeding::subseed;

/// One stage-2 iteration as recorded in the search trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub prompt_text: String,
    pub generation: u32,
    pub perf: f64,
    pub accepted: bool,
}

/// Propose a refined prompt from `l` sampled candidate texts. Per-sample
/// failures shrink the sample (minimum one usable sample); a failure of the
/// final distillation is an error.
pub fn condition_inference(
    pro: &[TextSample],
    prompt: &RewritePrompt,
    target: &ModelHandle,
    aux: &ModelHandle,
    cfg: &SearchConfig,
    iteration: usize,
) -> Result<RewritePrompt> {
    if cfg.l == 0 {
        return Err(Error::Validation(
            "condition inference needs l >= 1 samples".into(),
        ));
    }
    let samples = uniform_sample(pro, cfg.l, subseed(cfg.seed, "details", iteration as u64))?;
    let mut answers = Vec::with_capacity(samples.len());
    for sample in &samples {
        let result = (|| -> Result<String> {
            let rewritten = aux.rewrite(prompt, &sample.text)?;
            let continuation = target.generate_continuation(
                first_sentence(&rewritten),
                cfg.max_continuation_tokens,
            )?;
            aux.instruct(
                EDIT_INSTRUCTION,
                &[prompt.text.clone(), rewritten, continuation.text],
            )
        })();
        match result {
            Ok(answer) => answers.push(answer),
            Err(e) => log::warn!(
                "condition inference skipped sample '{}' at iteration {iteration}: {e}",
                sample.id
            ),
        }
    }
    if answers.is_empty() {
        return Err(Error::Search(format!(
            "every condition-inference sample failed at iteration {iteration}"
        )));
    }
    let distilled = aux.instruct(PROMPT_EXTRACT_INSTRUCTION, &answers)?;
    Ok(RewritePrompt::refined(distilled, prompt))
}

/// Synthesize the whole split under `prompt` and run the configured
/// detector. Any synthesis failure aborts the evaluation; a partial set is
/// never scored.
pub fn evaluate_prompt(
    split: &CorpusSplit,
    prompt: &RewritePrompt,
    handles: &DetectorHandles,
    cfg: &SearchConfig,
) -> Result<DetectionReport> {
    let vector = run_detector(
        cfg.detector,
        handles,
        split,
        Some(prompt),
        &cfg.detector_cfg(),
    )?;
    evaluate(
        cfg.detector.as_str(),
        &vector.member_scores,
        &vector.nonmember_scores,
        &cfg.fpr_levels,
        cfg.objective,
    )
}

/// Up to `max_iterations` rounds of condition inference + evaluation,
/// accepting a refinement only on strict improvement and stopping early
/// after `plateau` consecutive rejections. Returns the incumbent prompt,
/// its report, and the full iteration history. The incumbent's score is
/// evaluated once up front and reused; with deterministic backends this
/// equals re-evaluating it each round.
pub fn refine_loop(
    split: &CorpusSplit,
    initial: &RewritePrompt,
    handles: &DetectorHandles,
    cfg: &SearchConfig,
) -> Result<(RewritePrompt, DetectionReport, Vec<IterationRecord>)> {
    let aux = handles
        .auxiliary
        .as_ref()
        .ok_or_else(|| Error::Config("stage 2 requires an auxiliary backend".into()))?
        .clone();
    let mut incumbent = initial.clone();
    let mut incumbent_report = evaluate_prompt(split, &incumbent, handles, cfg)?;
    let mut records = Vec::new();
    let mut consecutive_rejections = 0usize;

    for iteration in 0..cfg.max_iterations {
        let wrap = |e: Error| Error::Iteration {
            index: iteration,
            source: Box::new(e),
        };
        let proposal = condition_inference(
            &split.pro,
            &incumbent,
            &handles.target,
            &aux,
            cfg,
            iteration,
        )
        .map_err(wrap)?;
        let report = evaluate_prompt(split, &proposal, handles, cfg).map_err(wrap)?;
        let accepted = report.perf > incumbent_report.perf;
        records.push(IterationRecord {
            iteration,
            prompt_text: proposal.text.clone(),
            generation: proposal.generation,
            perf: report.perf,
            accepted,
        });
        if accepted {
            incumbent = proposal;
            incumbent_report = report;
            consecutive_rejections = 0;
        } else {
            consecutive_rejections += 1;
            if consecutive_rejections >= cfg.plateau {
                log::info!(
                    "stage 2 plateaued after {consecutive_rejections} consecutive rejections at iteration {iteration}"
                );
                break;
            }
        }
    }
    Ok((incumbent, incumbent_report, records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::TextSample;
    use crate::gateway::ngram::{train_ngram, NgramBackend, SmoothingParams};
    use crate::gateway::scripted::ScriptedAux;
    use crate::gateway::ModelHandle;
    use crate::search::SearchConfig;
    use std::sync::Arc;

    fn sample(id: &str, text: &str) -> TextSample {
        TextSample::new(id, text, "").unwrap()
    }

    fn tiny_world() -> (CorpusSplit, DetectorHandles) {
        let pro: Vec<_> = (0..6)
            .map(|i| {
                sample(
                    &format!("p{i}"),
                    &format!("marble harbor number {i} sheltered vessels. captains kept ledgers about voyage {i}."),
                )
            })
            .collect();
        let held: Vec<_> = (0..6)
            .map(|i| {
                sample(
                    &format!("h{i}"),
                    &format!("granite tower number {i} guarded passes. wardens kept records about patrol {i}."),
                )
            })
            .collect();
        let split = CorpusSplit::new(pro, held).unwrap();
        let model = train_ngram(&split.pro, 2, SmoothingParams::default_for_order(2)).unwrap();
        let handles = DetectorHandles {
            target: ModelHandle::new(Arc::new(NgramBackend::new(model))),
            reference: None,
            auxiliary: Some(ModelHandle::new(Arc::new(ScriptedAux::new()))),
        };
        (split, handles)
    }

    #[test]
    fn zero_iterations_returns_initial_prompt_unchanged() {
        let (split, handles) = tiny_world();
        let cfg = SearchConfig {
            max_iterations: 0,
            ..SearchConfig::default()
        };
        let p0 = crate::registers::fixture_standard_prompt(1).unwrap();
        let (best, _report, records) = refine_loop(&split, &p0, &handles, &cfg).unwrap();
        assert_eq!(best, p0);
        assert!(records.is_empty());
    }

    #[test]
    fn condition_inference_tracks_lineage_and_is_deterministic() {
        let (split, handles) = tiny_world();
        let cfg = SearchConfig {
            l: 2,
            ..SearchConfig::default()
        };
        let aux = handles.auxiliary.clone().unwrap();
        let p0 = crate::registers::fixture_standard_prompt(1).unwrap();
        let a = condition_inference(&split.pro, &p0, &handles.target, &aux, &cfg, 0).unwrap();
        let b = condition_inference(&split.pro, &p0, &handles.target, &aux, &cfg, 0).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.generation, 1);
        assert_eq!(a.parent_hash.as_deref(), Some(p0.content_hash().as_str()));
    }

    #[test]
    fn accepted_perf_is_never_below_initial() {
        let (split, handles) = tiny_world();
        let cfg = SearchConfig {
            l: 2,
            max_iterations: 3,
            plateau: 2,
            ..SearchConfig::default()
        };
        let p0 = crate::registers::fixture_standard_prompt(1).unwrap();
        let initial = evaluate_prompt(&split, &p0, &handles, &cfg).unwrap();
        let (_best, report, records) = refine_loop(&split, &p0, &handles, &cfg).unwrap();
        assert!(report.perf >= initial.perf);
        // Accepted iterations must improve strictly and monotonically.
        let mut last = initial.perf;
        for r in &records {
            if r.accepted {
                assert!(r.perf > last);
                last = r.perf;
            }
        }
    }
}
