//! Diagnostic probe for tuning the synthetic harness. Ignored by default;
//! run with `cargo test --test harness_probe -- --ignored --nocapture`.

use textaudit_core::detectors::{run_detector, DetectorId};
use textaudit_core::metrics::evaluate;
use textaudit_core::scenario::{build_scenario, CorpusGenConfig, ScenarioSpec};
use textaudit_core::search::{run_stage_one, SearchConfig};

fn spec(seed: u64) -> ScenarioSpec {
    ScenarioSpec {
        seed,
        ..ScenarioSpec::default()
    }
}

fn detector_aucs(scenario: &textaudit_core::scenario::Scenario, cfg: &SearchConfig) {
    let detector_cfg = cfg.detector_cfg();
    for detector in DetectorId::ALL {
        let orig = run_detector(detector, &scenario.handles, &scenario.split, None, &detector_cfg)
            .and_then(|v| {
                evaluate(detector.as_str(), &v.member_scores, &v.nonmember_scores, &cfg.fpr_levels, cfg.objective)
            });
        let rev = run_detector(
            detector,
            &scenario.handles,
            &scenario.split,
            Some(&scenario.ground_truth.true_prompt),
            &detector_cfg,
        )
        .and_then(|v| {
            evaluate(detector.as_str(), &v.member_scores, &v.nonmember_scores, &cfg.fpr_levels, cfg.objective)
        });
        println!(
            "  {:8} orig AUC {:>7} | reversed AUC {:>7}",
            detector.as_str(),
            orig.map(|r| format!("{:.4}", r.auc)).unwrap_or_else(|e| format!("ERR {e}")),
            rev.map(|r| format!("{:.4}", r.auc)).unwrap_or_else(|e| format!("ERR {e}")),
        );
    }
}

#[test]
#[ignore]
fn probe_detection_collapse() {
    let t0 = std::time::Instant::now();
    let scenario = build_scenario(&spec(1), None).unwrap();
    let cfg = SearchConfig::default();
    println!("lyrical full-laundering scenario (seed 1):");
    detector_aucs(&scenario, &cfg);
    println!("elapsed: {:?}", t0.elapsed());
}

#[test]
#[ignore]
fn probe_stage_one() {
    for (register, seed) in [(1u8, 101u64), (5, 102), (8, 103), (11, 104), (19, 105)] {
        let t0 = std::time::Instant::now();
        let scenario = build_scenario(
            &ScenarioSpec {
                true_register_id: register,
                ..spec(seed)
            },
            None,
        )
        .unwrap();
        let cfg = SearchConfig {
            seed,
            ..SearchConfig::default()
        };
        let outcome = run_stage_one(&scenario.handles, &scenario.split, &cfg).unwrap();
        let mut conf = outcome.conf.clone();
        conf.sort_by(|a, b| b.conf.partial_cmp(&a.conf).unwrap());
        println!(
            "true register {register}: selected {} (perf {:.4}); top conf: {:?}; elapsed {:?}",
            outcome.register.id,
            outcome.report.perf,
            conf.iter()
                .take(6)
                .map(|e| (e.register_id, (e.conf * 1e4).round() / 1e4))
                .collect::<Vec<_>>(),
            t0.elapsed()
        );
    }
}

#[test]
#[ignore]
fn probe_detail_scenario_gaps() {
    use textaudit_core::gateway::scripted::DetailRule;
    use textaudit_core::search::{evaluate_prompt, refine_loop};
    let scenario = build_scenario(
        &ScenarioSpec {
            extra_detail_rule: Some(DetailRule::VividImagery),
            ..spec(7)
        },
        None,
    )
    .unwrap();
    let cfg = SearchConfig {
        seed: 7,
        ..SearchConfig::default()
    };
    let t0 = std::time::Instant::now();
    let baseline = run_detector(
        cfg.detector,
        &scenario.handles,
        &scenario.split,
        None,
        &cfg.detector_cfg(),
    )
    .and_then(|v| evaluate("loss", &v.member_scores, &v.nonmember_scores, &cfg.fpr_levels, cfg.objective))
    .unwrap();
    let stage1 = run_stage_one(&scenario.handles, &scenario.split, &cfg).unwrap();
    let (final_prompt, final_report, iters) =
        refine_loop(&scenario.split, &stage1.prompt, &scenario.handles, &cfg).unwrap();
    let oracle = evaluate_prompt(
        &scenario.split,
        &scenario.ground_truth.true_prompt,
        &scenario.handles,
        &cfg,
    )
    .unwrap();
    println!(
        "baseline {:.4} | stage1 {:.4} (register {}) | final {:.4} | oracle {:.4}",
        baseline.perf, stage1.report.perf, stage1.register.id, final_report.perf, oracle.perf
    );
    println!("final prompt: {}", final_prompt.text);
    for it in iters {
        println!("  iter {} perf {:.4} accepted {}", it.iteration, it.perf, it.accepted);
    }
    println!("elapsed {:?}", t0.elapsed());
}

#[test]
#[ignore]
fn probe_negative_control() {
    for seed in [31u64, 32, 33] {
        let scenario = build_scenario(
            &ScenarioSpec {
                negative_control: true,
                corpus: CorpusGenConfig {
                    pro: 250,
                    held: 250,
                    ..CorpusGenConfig::default()
                },
                ..spec(seed)
            },
            None,
        )
        .unwrap();
        let cfg = SearchConfig {
            seed,
            ..SearchConfig::default()
        };
        println!("negative control seed {seed}:");
        detector_aucs(&scenario, &cfg);
    }
}

#[test]
#[ignore]
fn probe_partial_laundering() {
    for seed in [51u64, 52, 53] {
        let scenario = build_scenario(
            &ScenarioSpec {
                laundering_fraction: 0.5,
                ..spec(seed)
            },
            None,
        )
        .unwrap();
        let cfg = SearchConfig {
            seed,
            ..SearchConfig::default()
        };
        let baseline = run_detector(
            DetectorId::Loss,
            &scenario.handles,
            &scenario.split,
            None,
            &cfg.detector_cfg(),
        )
        .and_then(|v| evaluate("loss", &v.member_scores, &v.nonmember_scores, &cfg.fpr_levels, cfg.objective))
        .unwrap();
        let reversed = run_detector(
            DetectorId::Loss,
            &scenario.handles,
            &scenario.split,
            Some(&scenario.ground_truth.true_prompt),
            &cfg.detector_cfg(),
        )
        .and_then(|v| evaluate("loss", &v.member_scores, &v.nonmember_scores, &cfg.fpr_levels, cfg.objective))
        .unwrap();
        println!(
            "partial 0.5 seed {seed}: baseline AUC {:.4} | true-prompt AUC {:.4}",
            baseline.auc, reversed.auc
        );
    }
}
