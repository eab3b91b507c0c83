//! Rendering of audit outcomes: a markdown report for humans plus
//! plot-ready CSV. Both renderers read the same verdict and trace structs,
//! so their numbers cannot drift apart.

use crate::metrics::DetectionReport;
use crate::scenario::GroundTruth;
use crate::search::{AuditVerdict, SearchTrace, Verdict};

fn fmt_opt(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{v:.4}"),
        None => "-".to_string(),
    }
}

fn tpr_level(report: &DetectionReport, level: f64) -> Option<f64> {
    report
        .tpr_at
        .iter()
        .find(|t| (t.fpr_level - level).abs() < 1e-12)
        .map(|t| t.tpr)
}

/// The human-readable audit report.
pub fn render_markdown(
    verdict: &AuditVerdict,
    trace: &SearchTrace,
    ground_truth: Option<&GroundTruth>,
) -> String {
    let mut out = String::new();
    out.push_str("# Audit report\n\n");
    out.push_str(&format!("**Verdict: {}**\n\n", verdict.verdict));
    out.push_str(&format!(
        "- decision rule: evidence requires best >= baseline + delta ({:.3}) and best >= theta ({:.3})\n",
        verdict.delta, verdict.theta
    ));
    out.push_str(&format!(
        "- baseline perf (originals): {:.4}\n- best perf (reversed): {:.4}\n",
        verdict.baseline_report.perf, verdict.best_report.perf
    ));
    let margin_over_baseline =
        verdict.best_report.perf - (verdict.baseline_report.perf + verdict.delta);
    let margin_over_floor = verdict.best_report.perf - verdict.theta;
    out.push_str(&format!(
        "- margin over baseline+delta: {margin_over_baseline:+.4}\n- margin over theta: {margin_over_floor:+.4}\n"
    ));
    if verdict.verdict == Verdict::NoEvidence {
        out.push_str(
            "- no performance-improving transformation was found; the margins above show how far each bar was missed\n",
        );
    }
    out.push_str(&format!(
        "- thresholds are configuration, not universal constants; ASR thresholds are chosen on the evaluation split itself (optimistic convention)\n- selected register: {}\n",
        verdict
            .selected_register
            .map(|id| id.to_string())
            .unwrap_or_else(|| "-".into())
    ));
    out.push('\n');

    if let Some(gt) = ground_truth {
        out.push_str("## Prompt pairing (synthetic scenario)\n\n");
        out.push_str(&format!("- original prompt: `{}`\n", gt.true_prompt.text));
        match &verdict.final_prompt {
            Some(p) => out.push_str(&format!("- reversed prompt: `{}`\n", p.text)),
            None => out.push_str("- reversed prompt: (search skipped)\n"),
        }
        out.push_str(&format!(
            "- true register: {} / selected: {}\n\n",
            gt.register_id,
            verdict
                .selected_register
                .map(|id| id.to_string())
                .unwrap_or_else(|| "-".into())
        ));
    } else if let Some(p) = &verdict.final_prompt {
        out.push_str(&format!("Reversed prompt: `{}`\n\n", p.text));
    }

    out.push_str("## Detector table (originals vs reversed surrogates)\n\n");
    out.push_str("| detector | AUC orig | AUC rev | ASR orig | ASR rev | TPR@1% orig | TPR@1% rev | TPR@5% orig | TPR@5% rev |\n");
    out.push_str("|---|---|---|---|---|---|---|---|---|\n");
    for row in &verdict.detector_table {
        let b = row.baseline.as_ref();
        let r = row.reversed.as_ref();
        out.push_str(&format!(
            "| {} | {} | {} | {} | {} | {} | {} | {} | {} |\n",
            row.detector_id,
            fmt_opt(b.map(|x| x.auc)),
            fmt_opt(r.map(|x| x.auc)),
            fmt_opt(b.map(|x| x.asr)),
            fmt_opt(r.map(|x| x.asr)),
            fmt_opt(b.and_then(|x| tpr_level(x, 0.01))),
            fmt_opt(r.and_then(|x| tpr_level(x, 0.01))),
            fmt_opt(b.and_then(|x| tpr_level(x, 0.05))),
            fmt_opt(r.and_then(|x| tpr_level(x, 0.05))),
        ));
    }
    let notes: Vec<String> = verdict
        .detector_table
        .iter()
        .filter_map(|row| {
            row.note
                .as_ref()
                .map(|n| format!("- {}: {n}", row.detector_id))
        })
        .collect();
    if !notes.is_empty() {
        out.push_str("\nDetector notes:\n");
        for n in notes {
            out.push_str(&n);
            out.push('\n');
        }
    }
    out.push('\n');

    if !trace.conf.is_empty() {
        out.push_str("## Register confidence (stage 1)\n\n");
        out.push_str("| register | abbr | conf | skipped |\n|---|---|---|---|\n");
        for entry in &trace.conf {
            out.push_str(&format!(
                "| {} | {} | {:.6} | {} |\n",
                entry.register_id, entry.abbreviation, entry.conf, entry.skipped_samples
            ));
        }
        out.push_str(&format!(
            "\nShortlist: {:?}; candidate perf: {:?}\n\n",
            trace.shortlist,
            trace
                .candidates
                .iter()
                .map(|c| (c.register_id, (c.perf * 1e4).round() / 1e4))
                .collect::<Vec<_>>()
        ));
    }

    if !trace.iterations.is_empty() {
        out.push_str("## Refinement iterations (stage 2)\n\n");
        out.push_str("| iter | perf | accepted | prompt |\n|---|---|---|---|\n");
        for it in &trace.iterations {
            out.push_str(&format!(
                "| {} | {:.4} | {} | {} |\n",
                it.iteration, it.perf, it.accepted, it.prompt_text
            ));
        }
        out.push('\n');
    }

    out.push_str(&format!(
        "Backend calls (logical): target {:?}, auxiliary {:?}\n",
        trace.call_counts.target, trace.call_counts.auxiliary
    ));
    out
}

/// Per-detector metric rows: `detector,variant,auc,asr,tpr1,tpr5`.
pub fn render_metrics_csv(verdict: &AuditVerdict) -> String {
    let mut out = String::from("detector,variant,auc,asr,tpr_at_1pct,tpr_at_5pct\n");
    for row in &verdict.detector_table {
        for (variant, report) in [("originals", &row.baseline), ("reversed", &row.reversed)] {
            if let Some(r) = report {
                out.push_str(&format!(
                    "{},{variant},{:.6},{:.6},{},{}\n",
                    row.detector_id,
                    r.auc,
                    r.asr,
                    fmt_opt(tpr_level(r, 0.01)),
                    fmt_opt(tpr_level(r, 0.05)),
                ));
            }
        }
    }
    out
}

/// Plot-ready search trajectory: register-confidence rows (`phase=conf`),
/// one row per evaluated candidate prompt (`phase=stage1`), and one row per
/// refinement iteration (`phase=stage2`).
pub fn render_trace_csv(trace: &SearchTrace) -> String {
    let mut out = String::from("phase,label,register_id,conf,perf,accepted,prompt\n");
    for entry in &trace.conf {
        out.push_str(&format!(
            "conf,{},{},{:.9},,,\n",
            entry.abbreviation, entry.register_id, entry.conf
        ));
    }
    for candidate in &trace.candidates {
        let prompt = if Some(candidate.register_id) == trace.selected_register {
            trace.stage1_prompt_text.clone().unwrap_or_default()
        } else {
            String::new()
        };
        out.push_str(&format!(
            "stage1,candidate,{},,{:.6},,{}\n",
            candidate.register_id,
            candidate.perf,
            csv_escape(&prompt)
        ));
    }
    for it in &trace.iterations {
        out.push_str(&format!(
            "stage2,iter-{},,,{:.6},{},{}\n",
            it.iteration,
            it.perf,
            it.accepted,
            csv_escape(&it.prompt_text)
        ));
    }
    out
}

fn csv_escape(field: &str) -> String {
    if field.contains(',') || field.contains('"') || field.contains('\n') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}
