//! The two-stage transformation search and the end-to-end audit verdict.

pub mod details;
pub mod goal;

use serde::{Deserialize, Serialize};

use crate::corpus::CorpusSplit;
use crate::detectors::{run_detector, DetectorConfig, DetectorHandles, DetectorId};
use crate::error::{Error, Result};
use crate::gateway::OpCounts;
use crate::metrics::{evaluate, DetectionReport, PerfObjective, DEFAULT_FPR_LEVELS};
use crate::prompt::RewritePrompt;
use crate::seeding::subseed;

pub use details::{condition_inference, evaluate_prompt, refine_loop, IterationRecord};
pub use goal::{
    build_opening_template, build_standard_prompts, register_confidence, run_stage_one,
    select_register, shortlist, CandidateRecord, RegisterConfEntry, StageOneOutcome,
};

/// All knobs of the two-stage search and the verdict rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Sample size for opening-template construction.
    pub n: usize,
    /// Sample size for continuation-confidence scoring. The most
    /// performance-sensitive knob of the search.
    pub m: usize,
    /// Sample size for per-iteration condition inference.
    pub l: usize,
    /// Stage-2 iteration budget.
    pub max_iterations: usize,
    /// Shortlist size after confidence scoring.
    pub top_k: usize,
    pub seed: u64,
    /// The primary detector whose performance the search maximizes.
    pub detector: DetectorId,
    pub objective: PerfObjective,
    pub fpr_levels: Vec<f64>,
    /// Continuation length for confidence scoring and condition inference.
    pub max_continuation_tokens: usize,
    /// Stage 2 stops after this many consecutive rejections.
    pub plateau: usize,
    /// Optional per-half subsample size for stage-1 candidate resolution.
    pub stage1_subsample: Option<usize>,
    /// Bottom-quantile size for Min-K and Min-K++.
    pub k_percent: f64,
    /// Number of held-out prefix shots for the recall detector.
    pub recall_shots: usize,
    /// Verdict margin: evidence requires best >= baseline + delta.
    pub delta: f64,
    /// Verdict floor: evidence requires best >= theta.
    pub theta: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            n: 10,
            m: 5,
            l: 5,
            max_iterations: 10,
            top_k: 5,
            seed: 0,
            detector: DetectorId::Loss,
            objective: PerfObjective::Auc,
            fpr_levels: DEFAULT_FPR_LEVELS.to_vec(),
            max_continuation_tokens: 64,
            plateau: 3,
            stage1_subsample: None,
            k_percent: 20.0,
            recall_shots: 5,
            delta: 0.05,
            theta: 0.65,
        }
    }
}

impl SearchConfig {
    /// Detector-level knobs, with the recall shot draw seeded from the
    /// search seed so it stays fixed for an entire audit.
    pub fn detector_cfg(&self) -> DetectorConfig {
        DetectorConfig {
            k_percent: self.k_percent,
            recall_shots: self.recall_shots,
            shot_seed: subseed(self.seed, "recall-shots", 0),
        }
    }
}

/// Logical gateway call counts per handle (cache hits included, so two
/// identically seeded runs record identical counts).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallCounts {
    pub target: OpCounts,
    pub auxiliary: OpCounts,
}

/// The full, serializable record of one audit run. Field order and
/// contents are deterministic for fixed config + seed on simulated
/// backends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchTrace {
    pub seed: u64,
    pub config: SearchConfig,
    pub baseline_perf: f64,
    /// Instruction text used to instantiate templates on samples (one
    /// representative; the template varies per register).
    pub fill_instruction: Option<String>,
    pub conf: Vec<RegisterConfEntry>,
    pub shortlist: Vec<u8>,
    pub candidates: Vec<CandidateRecord>,
    pub selected_register: Option<u8>,
    pub stage1_prompt_text: Option<String>,
    pub stage1_perf: Option<f64>,
    pub iterations: Vec<IterationRecord>,
    pub final_prompt_text: Option<String>,
    pub final_perf: Option<f64>,
    pub dropped_registers: Vec<(u8, String)>,
    pub call_counts: CallCounts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    /// The search found a transformation whose surrogates restore
    /// detection: best >= baseline + delta and best >= theta.
    LaunderingEvidence,
    /// Originals alone already clear the floor; no search needed.
    DirectMembership,
    /// No performance-improving transformation was found.
    NoEvidence,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::LaunderingEvidence => "laundering-evidence",
            Verdict::DirectMembership => "direct-membership",
            Verdict::NoEvidence => "no-evidence",
        })
    }
}

/// Baseline-vs-reversed metrics for one detector in the final report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorComparison {
    pub detector_id: String,
    pub baseline: Option<DetectionReport>,
    pub reversed: Option<DetectionReport>,
    pub note: Option<String>,
}

/// The audit outcome: a pure function of the reports and the configured
/// (delta, theta).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditVerdict {
    pub verdict: Verdict,
    pub delta: f64,
    pub theta: f64,
    pub baseline_report: DetectionReport,
    pub best_report: DetectionReport,
    pub selected_register: Option<u8>,
    pub final_prompt: Option<RewritePrompt>,
    pub detector_table: Vec<DetectorComparison>,
    pub trace_ref: String,
}

fn snapshot_counts(handles: &DetectorHandles) -> CallCounts {
    CallCounts {
        target: handles.target.logical_calls(),
        auxiliary: handles
            .auxiliary
            .as_ref()
            .map(|h| h.logical_calls())
            .unwrap_or_default(),
    }
}

fn primary_report(
    handles: &DetectorHandles,
    split: &CorpusSplit,
    transform: Option<&RewritePrompt>,
    cfg: &SearchConfig,
) -> Result<DetectionReport> {
    let vector = run_detector(cfg.detector, handles, split, transform, &cfg.detector_cfg())?;
    evaluate(
        cfg.detector.as_str(),
        &vector.member_scores,
        &vector.nonmember_scores,
        &cfg.fpr_levels,
        cfg.objective,
    )
}

/// Baseline-vs-reversed table across all six detectors. Detectors that a
/// backend cannot support (Min-K++ without full-vocab statistics, Ref
/// without a reference model) get a note instead of numbers.
pub fn detector_comparison_table(
    handles: &DetectorHandles,
    split: &CorpusSplit,
    final_prompt: Option<&RewritePrompt>,
    cfg: &SearchConfig,
) -> Vec<DetectorComparison> {
    let detector_cfg = cfg.detector_cfg();
    let mut table = Vec::new();
    for detector in DetectorId::ALL {
        let mut note = None;
        let mut run = |transform: Option<&RewritePrompt>| -> Option<DetectionReport> {
            match run_detector(detector, handles, split, transform, &detector_cfg) {
                Ok(vector) => evaluate(
                    detector.as_str(),
                    &vector.member_scores,
                    &vector.nonmember_scores,
                    &cfg.fpr_levels,
                    cfg.objective,
                )
                .ok(),
                Err(e) => {
                    note = Some(e.to_string());
                    None
                }
            }
        };
        let baseline = run(None);
        let reversed = final_prompt.and_then(|p| run(Some(p)));
        table.push(DetectorComparison {
            detector_id: detector.as_str().to_string(),
            baseline,
            reversed,
            note,
        });
    }
    table
}

/// The complete audit: baseline detection on originals, goal
/// identification, detail refinement, verdict.
///
/// Verdict rule: if the originals baseline already reaches the floor
/// `theta`, the run short-circuits to direct membership evidence. Otherwise
/// the two-stage search runs, and the result is laundering evidence exactly
/// when the best reversed performance clears both the floor and the margin
/// `delta` over the baseline.
pub fn audit(
    split: &CorpusSplit,
    handles: &DetectorHandles,
    cfg: &SearchConfig,
) -> Result<(AuditVerdict, SearchTrace)> {
    if handles.auxiliary.is_none() {
        return Err(Error::Config("audit requires an auxiliary backend".into()));
    }
    let baseline_report = primary_report(handles, split, None, cfg)?;

    let mut trace = SearchTrace {
        seed: cfg.seed,
        config: cfg.clone(),
        baseline_perf: baseline_report.perf,
        fill_instruction: None,
        conf: Vec::new(),
        shortlist: Vec::new(),
        candidates: Vec::new(),
        selected_register: None,
        stage1_prompt_text: None,
        stage1_perf: None,
        iterations: Vec::new(),
        final_prompt_text: None,
        final_perf: None,
        dropped_registers: Vec::new(),
        call_counts: CallCounts::default(),
    };

    if baseline_report.perf >= cfg.theta {
        let detector_table = detector_comparison_table(handles, split, None, cfg);
        trace.call_counts = snapshot_counts(handles);
        let verdict = AuditVerdict {
            verdict: Verdict::DirectMembership,
            delta: cfg.delta,
            theta: cfg.theta,
            baseline_report: baseline_report.clone(),
            best_report: baseline_report,
            selected_register: None,
            final_prompt: None,
            detector_table,
            trace_ref: "trace.json".into(),
        };
        return Ok((verdict, trace));
    }

    let stage1 = run_stage_one(handles, split, cfg)?;
    trace.fill_instruction = Some(format!(
        "{}<register template>",
        crate::gateway::scripted::FILL_INSTRUCTION_PREFIX
    ));
    trace.conf = stage1.conf.clone();
    trace.shortlist = stage1.shortlist.clone();
    trace.candidates = stage1
        .candidates
        .iter()
        .map(|(id, report)| CandidateRecord {
            register_id: *id,
            perf: report.perf,
        })
        .collect();
    trace.selected_register = Some(stage1.register.id);
    trace.stage1_prompt_text = Some(stage1.prompt.text.clone());
    trace.stage1_perf = Some(stage1.report.perf);
    trace.dropped_registers = stage1.dropped.clone();

    let (final_prompt, final_report, iterations) =
        refine_loop(split, &stage1.prompt, handles, cfg)?;
    trace.iterations = iterations;
    trace.final_prompt_text = Some(final_prompt.text.clone());
    trace.final_perf = Some(final_report.perf);

    let evidence = final_report.perf >= baseline_report.perf + cfg.delta
        && final_report.perf >= cfg.theta;
    let verdict_kind = if evidence {
        Verdict::LaunderingEvidence
    } else {
        Verdict::NoEvidence
    };

    let detector_table = detector_comparison_table(handles, split, Some(&final_prompt), cfg);
    trace.call_counts = snapshot_counts(handles);

    let verdict = AuditVerdict {
        verdict: verdict_kind,
        delta: cfg.delta,
        theta: cfg.theta,
        baseline_report,
        best_report: final_report,
        selected_register: Some(stage1.register.id),
        final_prompt: Some(final_prompt),
        detector_table,
        trace_ref: "trace.json".into(),
    };
    Ok((verdict, trace))
}
