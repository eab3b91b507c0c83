//! The six per-sample membership scorers. Every detector returns a real
//! score under the single convention "higher score means more likely a
//! training member"; per-detector sign flips happen inside this module and
//! nowhere else.

use std::io::Write;

use flate2::write::ZlibEncoder;
use flate2::Compression;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{uniform_sample, CorpusSplit, TextSample};
use crate::error::{Error, Result};
use crate::gateway::ModelHandle;
use crate::prompt::RewritePrompt;

/// Identifier of one scoring method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectorId {
    Loss,
    Ref,
    Zlib,
    MinK,
    Minkpp,
    Recall,
}

impl DetectorId {
    pub const ALL: [DetectorId; 6] = [
        DetectorId::Loss,
        DetectorId::Ref,
        DetectorId::Zlib,
        DetectorId::MinK,
        DetectorId::Minkpp,
        DetectorId::Recall,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            DetectorId::Loss => "loss",
            DetectorId::Ref => "ref",
            DetectorId::Zlib => "zlib",
            DetectorId::MinK => "mink",
            DetectorId::Minkpp => "minkpp",
            DetectorId::Recall => "recall",
        }
    }

    pub fn parse(s: &str) -> Result<DetectorId> {
        match s.trim().to_lowercase().as_str() {
            "loss" => Ok(DetectorId::Loss),
            "ref" => Ok(DetectorId::Ref),
            "zlib" => Ok(DetectorId::Zlib),
            "mink" | "min-k" => Ok(DetectorId::MinK),
            "minkpp" | "min-k++" | "mink++" => Ok(DetectorId::Minkpp),
            "recall" => Ok(DetectorId::Recall),
            other => Err(Error::Config(format!("unknown detector '{other}'"))),
        }
    }
}

impl std::fmt::Display for DetectorId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

pub const SIGN_CONVENTION: &str = "higher-is-member";

/// Order-aligned member/non-member scores for one detector run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector {
    pub detector_id: String,
    pub member_scores: Vec<f64>,
    pub nonmember_scores: Vec<f64>,
    pub sign_convention: String,
    pub transform_hash: Option<String>,
    pub model_id: String,
}

impl ScoreVector {
    pub fn new(
        detector_id: &str,
        member_scores: Vec<f64>,
        nonmember_scores: Vec<f64>,
        transform_hash: Option<String>,
        model_id: String,
    ) -> Result<Self> {
        if member_scores.is_empty() || nonmember_scores.is_empty() {
            return Err(Error::Validation(
                "score vectors must cover both halves of the split".into(),
            ));
        }
        if member_scores
            .iter()
            .chain(&nonmember_scores)
            .any(|s| !s.is_finite())
        {
            return Err(Error::Validation("scores must be finite".into()));
        }
        Ok(ScoreVector {
            detector_id: detector_id.to_string(),
            member_scores,
            nonmember_scores,
            sign_convention: SIGN_CONVENTION.to_string(),
            transform_hash,
            model_id,
        })
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn token_logprobs(handle: &ModelHandle, text: &str, prefix: Option<&str>) -> Result<Vec<f64>> {
    Ok(handle
        .score_tokens(text, prefix)?
        .iter()
        .map(|t| t.logprob)
        .collect())
}

/// Mean per-token log-probability (the negated average NLL).
pub fn loss_score(handle: &ModelHandle, sample: &TextSample) -> Result<f64> {
    Ok(mean(&token_logprobs(handle, &sample.text, None)?))
}

/// Target loss calibrated by a reference model: `loss(target) - loss(ref)`.
pub fn ref_score(
    target: &ModelHandle,
    reference: &ModelHandle,
    sample: &TextSample,
) -> Result<f64> {
    Ok(loss_score(target, sample)? - loss_score(reference, sample)?)
}

/// DEFLATE length of the UTF-8 text with zlib framing at level 6. Strictly
/// positive for all inputs (the zlib header and checksum alone are 8
/// bytes).
pub fn zlib_compressed_len(text: &str) -> usize {
    let mut encoder = ZlibEncoder::new(Vec::new(), Compression::new(6));
    encoder
        .write_all(text.as_bytes())
        .expect("in-memory compression cannot fail");
    encoder.finish().expect("in-memory compression cannot fail").len()
}

/// Total log-probability divided by the compressed byte length.
pub fn zlib_score(handle: &ModelHandle, sample: &TextSample) -> Result<f64> {
    let logprobs = token_logprobs(handle, &sample.text, None)?;
    let total: f64 = logprobs.iter().sum();
    Ok(total / zlib_compressed_len(&sample.text) as f64)
}

fn bottom_k_count(len: usize, k_percent: f64) -> usize {
    ((k_percent / 100.0) * len as f64).ceil().max(1.0) as usize
}

/// Mean of the `ceil(k% * T)` smallest token log-probabilities. At k = 100
/// this reduces to [`loss_score`] exactly (same summation order).
pub fn mink_score(handle: &ModelHandle, sample: &TextSample, k_percent: f64) -> Result<f64> {
    if !(0.0..=100.0).contains(&k_percent) || k_percent <= 0.0 {
        return Err(Error::Validation(format!(
            "k_percent must lie in (0, 100], got {k_percent}"
        )));
    }
    let logprobs = token_logprobs(handle, &sample.text, None)?;
    let take = bottom_k_count(logprobs.len(), k_percent);
    if take >= logprobs.len() {
        return Ok(mean(&logprobs));
    }
    let mut sorted = logprobs;
    sorted.sort_by(|a, b| a.total_cmp(b));
    Ok(mean(&sorted[..take]))
}

/// Min-K with per-position standardization: z = (logprob - mu) / sigma
/// against the full vocabulary's log-probability distribution. Positions
/// with zero variance contribute z = 0. Requires the full-vocab-stats
/// capability; anything else is an unsupported-detector error.
pub fn minkpp_score(handle: &ModelHandle, sample: &TextSample, k_percent: f64) -> Result<f64> {
    if !(0.0..=100.0).contains(&k_percent) || k_percent <= 0.0 {
        return Err(Error::Validation(format!(
            "k_percent must lie in (0, 100], got {k_percent}"
        )));
    }
    let logprobs = token_logprobs(handle, &sample.text, None)?;
    let stats = handle
        .vocab_stats(&sample.text, None)
        .map_err(|e| match e {
            Error::MissingCapability { model_id, .. } => Error::UnsupportedDetector {
                detector: DetectorId::Minkpp.as_str().into(),
                reason: format!("backend '{model_id}' exposes no full-vocabulary statistics"),
            },
            other => other,
        })?;
    if stats.len() != logprobs.len() {
        return Err(Error::Validation(
            "vocab statistics misaligned with token scores".into(),
        ));
    }
    let mut z: Vec<f64> = logprobs
        .iter()
        .zip(&stats)
        .map(|(lp, s)| if s.sigma == 0.0 { 0.0 } else { (lp - s.mu) / s.sigma })
        .collect();
    let take = bottom_k_count(z.len(), k_percent);
    z.sort_by(|a, b| a.total_cmp(b));
    Ok(mean(&z[..take.min(z.len())]))
}

/// Separator between concatenated prefix shots.
pub const RECALL_SHOT_SEPARATOR: &str = "\n\n";

/// Relative conditional log-likelihood: the ratio
/// `mean-logprob(text | shots) / mean-logprob(text)`.
///
/// Direction was calibrated once on the synthetic memorizer and is frozen
/// here as the raw ratio: conditioning on held-out shots lifts a
/// non-member's likelihood far more than a member's (a member's tokens are
/// already predicted well without help), so non-members' ratios fall
/// further below 1 and higher-is-member holds without negation. A
/// direction test pins this.
pub fn recall_score(
    handle: &ModelHandle,
    sample: &TextSample,
    prefix_shots: &[TextSample],
) -> Result<f64> {
    if prefix_shots.is_empty() {
        return Err(Error::Validation("recall requires at least one prefix shot".into()));
    }
    let prefix = prefix_shots
        .iter()
        .map(|s| s.text.as_str())
        .collect::<Vec<_>>()
        .join(RECALL_SHOT_SEPARATOR);
    let unconditional = mean(&token_logprobs(handle, &sample.text, None)?);
    let conditional = mean(&token_logprobs(handle, &sample.text, Some(&prefix))?);
    if unconditional == 0.0 {
        // Probability-1 model on this text; conditioning cannot change it.
        return Ok(1.0);
    }
    Ok(conditional / unconditional)
}

/// Backends a detector run may need.
#[derive(Clone)]
pub struct DetectorHandles {
    pub target: ModelHandle,
    pub reference: Option<ModelHandle>,
    pub auxiliary: Option<ModelHandle>,
}

/// Detector-level knobs, all pinned by configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectorConfig {
    /// Bottom-quantile size for Min-K and Min-K++.
    pub k_percent: f64,
    /// Number of held-out shots prepended by the recall detector.
    pub recall_shots: usize,
    /// Seed for the shot draw; fixed for an entire audit.
    pub shot_seed: u64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            k_percent: 20.0,
            recall_shots: 5,
            shot_seed: 0,
        }
    }
}

fn score_sample(
    detector: DetectorId,
    handles: &DetectorHandles,
    sample: &TextSample,
    shots: Option<&[TextSample]>,
    cfg: &DetectorConfig,
) -> Result<f64> {
    match detector {
        DetectorId::Loss => loss_score(&handles.target, sample),
        DetectorId::Zlib => zlib_score(&handles.target, sample),
        DetectorId::MinK => mink_score(&handles.target, sample, cfg.k_percent),
        DetectorId::Minkpp => minkpp_score(&handles.target, sample, cfg.k_percent),
        DetectorId::Ref => {
            let reference = handles.reference.as_ref().ok_or_else(|| {
                Error::Config("the ref detector needs a reference backend".into())
            })?;
            ref_score(&handles.target, reference, sample)
        }
        DetectorId::Recall => {
            let shots = shots.ok_or_else(|| {
                Error::Validation("recall requires prefix shots from the held-out half".into())
            })?;
            recall_score(&handles.target, sample, shots)
        }
    }
}

fn synthesize(
    aux: &ModelHandle,
    prompt: &RewritePrompt,
    samples: &[TextSample],
) -> Result<Vec<TextSample>> {
    samples
        .par_iter()
        .map(|sample| {
            let text = aux
                .rewrite(prompt, &sample.text)
                .map_err(|e| e.for_sample(&sample.id))?;
            TextSample::new(sample.id.clone(), &text, sample.source_tag.clone())
                .map_err(|e| e.for_sample(&sample.id))
        })
        .collect()
}

/// Run one detector over the split, optionally rewriting every sample with
/// `transform` first. Score vectors align with the split's order; any
/// per-sample failure aborts the run and names the sample.
pub fn run_detector(
    detector: DetectorId,
    handles: &DetectorHandles,
    split: &CorpusSplit,
    transform: Option<&RewritePrompt>,
    cfg: &DetectorConfig,
) -> Result<ScoreVector> {
    let (pro, held) = match transform {
        None => (split.pro.clone(), split.held.clone()),
        Some(prompt) => {
            let aux = handles.auxiliary.as_ref().ok_or_else(|| {
                Error::Config("a transform requires an auxiliary backend".into())
            })?;
            (
                synthesize(aux, prompt, &split.pro)?,
                synthesize(aux, prompt, &split.held)?,
            )
        }
    };

    let shots = match detector {
        DetectorId::Recall => Some(uniform_sample(&held, cfg.recall_shots, cfg.shot_seed)?),
        _ => None,
    };
    let shots_ref = shots.as_deref();

    let member_scores: Vec<f64> = pro
        .par_iter()
        .map(|s| score_sample(detector, handles, s, shots_ref, cfg).map_err(|e| e.for_sample(&s.id)))
        .collect::<Result<_>>()?;
    let nonmember_scores: Vec<f64> = held
        .par_iter()
        .map(|s| score_sample(detector, handles, s, shots_ref, cfg).map_err(|e| e.for_sample(&s.id)))
        .collect::<Result<_>>()?;

    ScoreVector::new(
        detector.as_str(),
        member_scores,
        nonmember_scores,
        transform.map(|p| p.content_hash()),
        handles.target.model_id().to_string(),
    )
}
