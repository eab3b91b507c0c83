//! Threshold-free and thresholded detection metrics over score vectors,
//! plus the scalar objective driving the prompt search.
//!
//! The kernels are generic over the score scalar (`f32`, `f64`, anything
//! ordered and float-like); results are reported in `f64`. All three
//! metrics depend only on score ranks, so they are exactly invariant under
//! strictly increasing transforms. Scores follow the single convention
//! "higher means more likely a training member".

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_nonempty<F: Float>(members: &[F], nonmembers: &[F]) -> Result<()> {
    if members.is_empty() || nonmembers.is_empty() {
        return Err(Error::Validation(
            "metrics need non-empty member and non-member score lists".into(),
        ));
    }
    Ok(())
}

fn sort_scores<F: Float>(scores: &[F]) -> Vec<F> {
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("scores must be finite"));
    sorted
}

/// Mann-Whitney AUC: over all (member, nonmember) pairs, the fraction with
/// member > nonmember, ties counting one half. Computed by average ranks in
/// O((n+m) log(n+m)); agrees with brute-force pair counting to within
/// floating-point rounding.
pub fn auc<F: Float>(members: &[F], nonmembers: &[F]) -> Result<f64> {
    check_nonempty(members, nonmembers)?;
    let n = members.len();
    let m = nonmembers.len();
    let mut combined: Vec<(F, bool)> = members
        .iter()
        .map(|&s| (s, true))
        .chain(nonmembers.iter().map(|&s| (s, false)))
        .collect();
    combined.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("scores must be finite"));

    let mut member_rank_sum = 0.0f64;
    let mut i = 0;
    while i < combined.len() {
        let mut j = i;
        while j < combined.len() && combined[j].0 == combined[i].0 {
            j += 1;
        }
        // Ranks are 1-based; tied values share the average rank.
        let avg_rank = ((i + 1 + j) as f64) / 2.0;
        let tied_members = combined[i..j].iter().filter(|(_, is_m)| *is_m).count();
        member_rank_sum += avg_rank * tied_members as f64;
        i = j;
    }
    let u = member_rank_sum - (n * (n + 1)) as f64 / 2.0;
    Ok(u / (n as f64 * m as f64))
}

/// Balanced accuracy with the decision rule "member iff score >= tau".
fn balanced_accuracy_at<F: Float>(
    sorted_members: &[F],
    sorted_nonmembers: &[F],
    tau: Option<F>,
) -> f64 {
    let n = sorted_members.len() as f64;
    let m = sorted_nonmembers.len() as f64;
    match tau {
        // tau = +infinity: nothing is classified as a member.
        None => 0.5 * (0.0 / n + m / m),
        Some(tau) => {
            let tp = count_at_least(sorted_members, tau) as f64;
            let fp = count_at_least(sorted_nonmembers, tau) as f64;
            let tn = m - fp;
            0.5 * (tp / n + tn / m)
        }
    }
}

fn count_at_least<F: Float>(sorted: &[F], tau: F) -> usize {
    // Number of entries >= tau in an ascending-sorted slice.
    let idx = sorted.partition_point(|&s| s < tau);
    sorted.len() - idx
}

/// Attack success rate: the maximum balanced accuracy over all thresholds.
/// The sweep over distinct observed scores plus +infinity is exact for
/// empirical score sets, and the result is never below the degenerate 0.5.
pub fn asr<F: Float>(members: &[F], nonmembers: &[F]) -> Result<f64> {
    check_nonempty(members, nonmembers)?;
    let sorted_members = sort_scores(members);
    let sorted_nonmembers = sort_scores(nonmembers);
    let mut taus: Vec<F> = sorted_members
        .iter()
        .chain(sorted_nonmembers.iter())
        .copied()
        .collect();
    taus.sort_by(|a, b| a.partial_cmp(b).expect("scores must be finite"));
    taus.dedup();

    let mut best = balanced_accuracy_at(&sorted_members, &sorted_nonmembers, None);
    for tau in taus {
        let ba = balanced_accuracy_at(&sorted_members, &sorted_nonmembers, Some(tau));
        if ba > best {
            best = ba;
        }
    }
    Ok(best)
}

/// The largest TPR achievable by any threshold whose empirical FPR does not
/// exceed `fpr_level`.
pub fn tpr_at_fpr<F: Float>(members: &[F], nonmembers: &[F], fpr_level: f64) -> Result<f64> {
    check_nonempty(members, nonmembers)?;
    if !(0.0..1.0).contains(&fpr_level) || fpr_level <= 0.0 {
        return Err(Error::Validation(format!(
            "fpr level must lie in (0, 1), got {fpr_level}"
        )));
    }
    let sorted_members = sort_scores(members);
    let sorted_nonmembers = sort_scores(nonmembers);
    let n = sorted_members.len() as f64;
    let m = sorted_nonmembers.len() as f64;

    let mut taus: Vec<F> = sorted_members
        .iter()
        .chain(sorted_nonmembers.iter())
        .copied()
        .collect();
    taus.sort_by(|a, b| a.partial_cmp(b).expect("scores must be finite"));
    taus.dedup();

    // tau = +infinity is always admissible: FPR 0, TPR 0.
    let mut best = 0.0f64;
    for tau in taus {
        let fpr = count_at_least(&sorted_nonmembers, tau) as f64 / m;
        if fpr <= fpr_level {
            let tpr = count_at_least(&sorted_members, tau) as f64 / n;
            if tpr > best {
                best = tpr;
            }
        }
    }
    Ok(best)
}

/// The scalar the two-stage search maximizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum PerfObjective {
    /// AUC of the primary detector (threshold-free; the default).
    Auc,
    /// Best balanced accuracy.
    Asr,
    /// `weight * AUC + (1 - weight) * ASR`.
    Blend { weight: f64 },
}

impl Default for PerfObjective {
    fn default() -> Self {
        PerfObjective::Auc
    }
}

/// The search objective for a score vector.
pub fn perf<F: Float>(members: &[F], nonmembers: &[F], objective: PerfObjective) -> Result<f64> {
    match objective {
        PerfObjective::Auc => auc(members, nonmembers),
        PerfObjective::Asr => asr(members, nonmembers),
        PerfObjective::Blend { weight } => {
            let w = weight.clamp(0.0, 1.0);
            Ok(w * auc(members, nonmembers)? + (1.0 - w) * asr(members, nonmembers)?)
        }
    }
}

/// TPR at one FPR level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TprAtFpr {
    pub fpr_level: f64,
    pub tpr: f64,
}

/// The full metric summary of one detection run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub detector_id: String,
    pub auc: f64,
    pub asr: f64,
    /// Sorted by level; monotone non-decreasing in the level by
    /// construction.
    pub tpr_at: Vec<TprAtFpr>,
    /// The configured search objective evaluated on this vector.
    pub perf: f64,
    pub n_member: usize,
    pub n_nonmember: usize,
}

/// Default FPR levels reported everywhere: 1% and 5%.
pub const DEFAULT_FPR_LEVELS: [f64; 2] = [0.01, 0.05];

pub fn evaluate(
    detector_id: &str,
    members: &[f64],
    nonmembers: &[f64],
    fpr_levels: &[f64],
    objective: PerfObjective,
) -> Result<DetectionReport> {
    let mut levels: Vec<f64> = fpr_levels.to_vec();
    levels.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut tpr_at = Vec::with_capacity(levels.len());
    for level in levels {
        tpr_at.push(TprAtFpr {
            fpr_level: level,
            tpr: tpr_at_fpr(members, nonmembers, level)?,
        });
    }
    Ok(DetectionReport {
        detector_id: detector_id.to_string(),
        auc: auc(members, nonmembers)?,
        asr: asr(members, nonmembers)?,
        tpr_at,
        perf: perf(members, nonmembers, objective)?,
        n_member: members.len(),
        n_nonmember: nonmembers.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Brute-force pair-counting oracle; deliberately O(n*m) and
    /// independent of the rank-based implementation.
    fn auc_oracle(members: &[f64], nonmembers: &[f64]) -> f64 {
        let mut total = 0.0;
        for &m in members {
            for &n in nonmembers {
                if m > n {
                    total += 1.0;
                } else if m == n {
                    total += 0.5;
                }
            }
        }
        total / (members.len() * nonmembers.len()) as f64
    }

    /// Exhaustive threshold sweep oracle for ASR.
    fn asr_oracle(members: &[f64], nonmembers: &[f64]) -> f64 {
        let mut taus: Vec<f64> = members.iter().chain(nonmembers).copied().collect();
        taus.push(f64::INFINITY);
        let n = members.len() as f64;
        let m = nonmembers.len() as f64;
        taus.iter()
            .map(|&tau| {
                let tp = members.iter().filter(|&&s| s >= tau).count() as f64;
                let tn = nonmembers.iter().filter(|&&s| s < tau).count() as f64;
                0.5 * (tp / n + tn / m)
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn auc_perfect_separation() {
        assert_eq!(auc(&[0.9, 0.8], &[0.1, 0.2]).unwrap(), 1.0);
    }

    #[test]
    fn auc_all_ties_is_half() {
        assert_eq!(auc(&[0.5, 0.5], &[0.5, 0.5]).unwrap(), 0.5);
    }

    #[test]
    fn auc_mixed_example() {
        // Pairs: (.8>.5), (.8>.1), (.3<.5), (.3>.1) -> 3/4.
        assert_eq!(auc(&[0.8, 0.3], &[0.5, 0.1]).unwrap(), 0.75);
    }

    #[test]
    fn asr_examples() {
        assert_eq!(asr(&[0.9, 0.8], &[0.1, 0.2]).unwrap(), 1.0);
        assert_eq!(asr(&[0.8, 0.3], &[0.5, 0.1]).unwrap(), 0.75);
        assert_eq!(asr(&[0.4, 0.6], &[0.4, 0.6]).unwrap(), 0.5);
    }

    #[test]
    fn tpr_at_fpr_strict_example() {
        // Only thresholds above 0.95 keep FPR at 0, and they reject the
        // lone member.
        assert_eq!(tpr_at_fpr(&[0.9], &[0.95, 0.5], 0.05).unwrap(), 0.0);
        assert_eq!(tpr_at_fpr(&[0.9, 0.8], &[0.1, 0.2], 0.05).unwrap(), 1.0);
    }

    #[test]
    fn perf_is_auc_by_default() {
        let members = [0.8, 0.3, 0.9];
        let nonmembers = [0.5, 0.1];
        assert_eq!(
            perf(&members, &nonmembers, PerfObjective::Auc).unwrap(),
            auc(&members, &nonmembers).unwrap()
        );
    }

    #[test]
    fn perf_of_random_scores_concentrates_near_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let members: Vec<f64> = (0..1000).map(|_| rng.gen::<f64>()).collect();
        let nonmembers: Vec<f64> = (0..1000).map(|_| rng.gen::<f64>()).collect();
        let p = perf(&members, &nonmembers, PerfObjective::Auc).unwrap();
        assert!((p - 0.5).abs() < 0.05, "got {p}");
    }

    #[test]
    fn evaluate_builds_sorted_monotone_levels() {
        let report = evaluate(
            "loss",
            &[0.9, 0.7, 0.4],
            &[0.5, 0.3, 0.2],
            &[0.05, 0.01],
            PerfObjective::Auc,
        )
        .unwrap();
        assert_eq!(report.tpr_at[0].fpr_level, 0.01);
        assert_eq!(report.tpr_at[1].fpr_level, 0.05);
        assert!(report.tpr_at[0].tpr <= report.tpr_at[1].tpr);
        assert!(report.asr >= 0.5);
        assert_eq!(report.n_member, 3);
        assert_eq!(report.n_nonmember, 3);
    }

    #[test]
    fn empty_inputs_error() {
        assert!(auc::<f64>(&[], &[0.1]).is_err());
        assert!(asr::<f64>(&[0.1], &[]).is_err());
        assert!(tpr_at_fpr::<f64>(&[], &[], 0.05).is_err());
    }

    #[test]
    fn kernels_accept_f32() {
        let members: [f32; 2] = [0.9, 0.8];
        let nonmembers: [f32; 2] = [0.1, 0.2];
        assert_eq!(auc(&members, &nonmembers).unwrap(), 1.0);
        assert_eq!(asr(&members, &nonmembers).unwrap(), 1.0);
    }

    fn random_instance(rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
        let n = rng.gen_range(1..=50);
        let m = rng.gen_range(1..=50);
        // Quantized scores inject plenty of ties.
        let members: Vec<f64> = (0..n).map(|_| (rng.gen_range(0..20) as f64) / 10.0).collect();
        let nonmembers: Vec<f64> = (0..m).map(|_| (rng.gen_range(0..20) as f64) / 10.0).collect();
        (members, nonmembers)
    }

    #[test]
    fn auc_matches_brute_force_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..300 {
            let (members, nonmembers) = random_instance(&mut rng);
            let fast = auc(&members, &nonmembers).unwrap();
            let slow = auc_oracle(&members, &nonmembers);
            assert!((fast - slow).abs() < 1e-12, "fast {fast} vs oracle {slow}");
        }
    }

    #[test]
    fn asr_matches_exhaustive_sweep_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..300 {
            let (members, nonmembers) = random_instance(&mut rng);
            let fast = asr(&members, &nonmembers).unwrap();
            let slow = asr_oracle(&members, &nonmembers);
            assert_eq!(fast, slow);
        }
    }

    proptest! {
        #[test]
        fn complement_identity_without_ties(
            seed in any::<u64>(),
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let members: Vec<f64> = (0..12).map(|i| rng.gen::<f64>() + i as f64 * 1e-6).collect();
            let nonmembers: Vec<f64> = (0..9).map(|i| rng.gen::<f64>() - i as f64 * 1e-6).collect();
            let forward = auc(&members, &nonmembers).unwrap();
            let backward = auc(&nonmembers, &members).unwrap();
            prop_assert!((forward + backward - 1.0).abs() < 1e-12);
        }

        #[test]
        fn increasing_transform_invariance(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let members: Vec<f64> = (0..15).map(|_| (rng.gen_range(0..12) as f64) / 4.0).collect();
            let nonmembers: Vec<f64> = (0..10).map(|_| (rng.gen_range(0..12) as f64) / 4.0).collect();
            let t = |v: &[f64]| v.iter().map(|x| 2.0 * x + 1.0).collect::<Vec<f64>>();
            prop_assert_eq!(
                auc(&members, &nonmembers).unwrap(),
                auc(&t(&members), &t(&nonmembers)).unwrap()
            );
            prop_assert_eq!(
                asr(&members, &nonmembers).unwrap(),
                asr(&t(&members), &t(&nonmembers)).unwrap()
            );
            prop_assert_eq!(
                tpr_at_fpr(&members, &nonmembers, 0.05).unwrap(),
                tpr_at_fpr(&t(&members), &t(&nonmembers), 0.05).unwrap()
            );
        }

        #[test]
        fn asr_is_at_least_half(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let members: Vec<f64> = (0..8).map(|_| rng.gen::<f64>()).collect();
            let nonmembers: Vec<f64> = (0..8).map(|_| rng.gen::<f64>()).collect();
            prop_assert!(asr(&members, &nonmembers).unwrap() >= 0.5);
        }

        #[test]
        fn tpr_monotone_in_level(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let members: Vec<f64> = (0..10).map(|_| rng.gen::<f64>()).collect();
            let nonmembers: Vec<f64> = (0..10).map(|_| rng.gen::<f64>()).collect();
            let mut last = 0.0;
            for level in [0.01, 0.05, 0.1, 0.25, 0.5, 0.9] {
                let tpr = tpr_at_fpr(&members, &nonmembers, level).unwrap();
                prop_assert!(tpr >= last);
                last = tpr;
            }
        }
    }
}
