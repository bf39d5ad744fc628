//! Evaluation metrics: threshold sweeps, ROC/PR curves and areas, the
//! prioritization error, and time-varying AUC with the noisy-timestamp
//! robustness protocol.
//!
//! All functions take parallel slices and are independent of input order.

use chrono::NaiveDate;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("no positive instances")]
    NoPositives,
    #[error("both classes are required")]
    OneClass,
    #[error("{0} scores but {1} labels")]
    Length(usize, usize),
    #[error("non-finite score")]
    NonFinite,
    #[error("no instance carries a PoC date")]
    NoPocDates,
    #[error("fraction {0} outside [0,1]")]
    Fraction(f64),
}

fn check(scores: &[f64], labels: &[u8]) -> Result<(usize, usize), EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::Length(scores.len(), labels.len()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(EvalError::NonFinite);
    }
    let pos = labels.iter().filter(|y| **y != 0).count();
    Ok((pos, labels.len() - pos))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub tp: usize,
    pub fp: usize,
}

/// Precision and recall of the rule `score >= threshold` at every distinct
/// score, in decreasing threshold order. Instances without a score are never
/// predicted positive but still count toward recall's denominator.
pub fn threshold_sweep_partial(scores: &[Option<f64>], labels: &[u8]) -> Result<Vec<PrPoint>, EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::Length(scores.len(), labels.len()));
    }
    let total_pos = labels.iter().filter(|y| **y != 0).count();
    if total_pos == 0 {
        return Err(EvalError::NoPositives);
    }
    let mut scored: Vec<(f64, u8)> = Vec::with_capacity(scores.len());
    for (s, y) in scores.iter().zip(labels) {
        if let Some(s) = s {
            if !s.is_finite() {
                return Err(EvalError::NonFinite);
            }
            scored.push((*s, *y));
        }
    }
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut out = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < scored.len() {
        let t = scored[i].0;
        while i < scored.len() && scored[i].0 == t {
            if scored[i].1 != 0 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        out.push(PrPoint {
            threshold: t,
            precision: tp as f64 / (tp + fp) as f64,
            recall: tp as f64 / total_pos as f64,
            tp,
            fp,
        });
    }
    Ok(out)
}

/// [`threshold_sweep_partial`] with every instance scored. The threshold at
/// +∞ predicts nothing, so its precision is undefined and it is omitted.
pub fn threshold_sweep(scores: &[f64], labels: &[u8]) -> Result<Vec<PrPoint>, EvalError> {
    check(scores, labels)?;
    let s: Vec<Option<f64>> = scores.iter().map(|x| Some(*x)).collect();
    threshold_sweep_partial(&s, labels)
}

/// Precision at the largest threshold whose recall reaches `recall`.
pub fn precision_at_recall(points: &[PrPoint], recall: f64) -> Option<f64> {
    points.iter().find(|p| p.recall >= recall).map(|p| p.precision)
}

/// Step-wise PR area: `Σ (R_k − R_{k−1}) · P_k` over the sweep, starting from
/// recall 0. No linear interpolation between points.
pub fn auc_pr(scores: &[f64], labels: &[u8]) -> Result<f64, EvalError> {
    let (pos, neg) = check(scores, labels)?;
    if pos == 0 || neg == 0 {
        return Err(EvalError::OneClass);
    }
    Ok(step_area(&threshold_sweep(scores, labels)?))
}

fn step_area(points: &[PrPoint]) -> f64 {
    let mut prev = 0.0;
    let mut area = 0.0;
    for p in points {
        area += (p.recall - prev) * p.precision;
        prev = p.recall;
    }
    area
}

/// Mann-Whitney ROC area: P(s⁺ > s⁻) + ½ P(s⁺ = s⁻), from midranks.
pub fn auc_roc(scores: &[f64], labels: &[u8]) -> Result<f64, EvalError> {
    let (pos, neg) = check(scores, labels)?;
    if pos == 0 || neg == 0 {
        return Err(EvalError::OneClass);
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|a, b| scores[*a].total_cmp(&scores[*b]));
    // Count, for each tie group, positives and the negatives strictly below.
    let mut wins = 0.0f64;
    let mut neg_below = 0usize;
    let mut i = 0;
    while i < idx.len() {
        let t = scores[idx[i]];
        let (mut gp, mut gn) = (0usize, 0usize);
        while i < idx.len() && scores[idx[i]] == t {
            if labels[idx[i]] != 0 {
                gp += 1;
            } else {
                gn += 1;
            }
            i += 1;
        }
        wins += gp as f64 * (neg_below as f64 + 0.5 * gn as f64);
        neg_below += gn;
    }
    Ok(wins / (pos as f64 * neg as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    /// The first point sits above every score; JSON has no infinity and
    /// writes it as null.
    #[serde(deserialize_with = "inf_if_null")]
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

fn inf_if_null<'de, D: serde::Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
}

/// ROC curve from (0,0) through every distinct score in decreasing order.
pub fn roc_points(scores: &[f64], labels: &[u8]) -> Result<Vec<RocPoint>, EvalError> {
    let (pos, neg) = check(scores, labels)?;
    if pos == 0 || neg == 0 {
        return Err(EvalError::OneClass);
    }
    let mut out = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    for p in threshold_sweep(scores, labels)? {
        out.push(RocPoint {
            threshold: p.threshold,
            fpr: p.fp as f64 / neg as f64,
            tpr: p.tp as f64 / pos as f64,
        });
    }
    Ok(out)
}

/// Probability that a vulnerability is mis-ordered against the set `others`
/// of (score, label) pairs. Exploited `i`: fraction of `others` that are
/// non-exploited with score ≥ `score`. Non-exploited `i`: fraction that are
/// exploited with score ≤ `score`. `None` when `others` is empty.
pub fn prioritization_error(score: f64, label: u8, others: &[(f64, u8)]) -> Option<f64> {
    if others.is_empty() {
        return None;
    }
    let bad = others
        .iter()
        .filter(|(s, y)| {
            if label != 0 {
                *y == 0 && *s >= score
            } else {
                *y != 0 && *s <= score
            }
        })
        .count();
    Some(bad as f64 / others.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrioInstance {
    pub disclosure: NaiveDate,
    pub score: f64,
    pub label: u8,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    pub median: f64,
}

impl Summary {
    /// Population standard deviation; lower median. `None` for no values.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Some(Self {
            n: values.len(),
            mean,
            std: var.sqrt(),
            median: sorted[(sorted.len() - 1) / 2],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrioPoint {
    pub window_days: i64,
    pub exploited: Option<Summary>,
    pub not_exploited: Option<Summary>,
    /// Instances whose comparison set was empty.
    pub skipped: usize,
}

/// Prioritization error of every instance against the vulnerabilities
/// disclosed in `(δ_i, δ_i + t]`, summarized per class for each window `t`.
pub fn prioritization_curve(instances: &[PrioInstance], windows: &[i64]) -> Vec<PrioPoint> {
    let mut order: Vec<usize> = (0..instances.len()).collect();
    order.sort_by_key(|i| instances[*i].disclosure);
    let dates: Vec<NaiveDate> = order.iter().map(|i| instances[*i].disclosure).collect();
    windows
        .iter()
        .map(|&t| {
            let mut by_class = [Vec::new(), Vec::new()];
            let mut skipped = 0;
            for inst in instances {
                let end = crate::corpus::add_days(inst.disclosure, t);
                let lo = dates.partition_point(|d| *d <= inst.disclosure);
                let hi = dates.partition_point(|d| *d <= end);
                let others: Vec<(f64, u8)> = order[lo..hi.max(lo)]
                    .iter()
                    .map(|j| (instances[*j].score, instances[*j].label))
                    .collect();
                match prioritization_error(inst.score, inst.label, &others) {
                    Some(e) => by_class[usize::from(inst.label != 0)].push(e),
                    None => skipped += 1,
                }
            }
            PrioPoint {
                window_days: t,
                exploited: Summary::of(&by_class[1]),
                not_exploited: Summary::of(&by_class[0]),
                skipped,
            }
        })
        .collect()
}

/// ROC-AUC separating instances exploited within `t` days of disclosure
/// (`delay ≤ t`) from those exploited later. `None` if either side is empty.
pub fn time_varying_auc(scores: &[f64], delays: &[i64], t: i64) -> Option<f64> {
    let labels: Vec<u8> = delays.iter().map(|d| u8::from(*d <= t)).collect();
    auc_roc(scores, &labels).ok()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AucPoint {
    pub horizon_days: i64,
    pub auc: f64,
}

pub fn time_varying_auc_series(scores: &[f64], delays: &[i64], horizons: &[i64]) -> Vec<AucPoint> {
    horizons
        .iter()
        .filter_map(|&t| time_varying_auc(scores, delays, t).map(|auc| AucPoint { horizon_days: t, auc }))
        .collect()
}

/// Repetitions averaged by [`timestamp_noise_protocol`].
pub const TIMESTAMP_NOISE_REPS: u64 = 5;

/// Replaces the exploit delay by the PoC delay for `round(rho · m)` of the
/// `m` instances that have a PoC, chosen uniformly with `rng`.
pub fn substitute_poc_delays(delays: &[i64], poc_delays: &[Option<i64>], rho: f64, rng: &mut ChaCha8Rng) -> Vec<i64> {
    let with_poc: Vec<usize> = (0..delays.len()).filter(|i| poc_delays[*i].is_some()).collect();
    let k = (rho * with_poc.len() as f64).round() as usize;
    let mut out = delays.to_vec();
    for pick in rand::seq::index::sample(rng, with_poc.len(), k.min(with_poc.len())) {
        let i = with_poc[pick];
        out[i] = poc_delays[i].expect("filtered");
    }
    out
}

/// Time-varying AUC series under the assumption that a fraction `rho` of
/// PoCs are already functional exploits, averaged over
/// [`TIMESTAMP_NOISE_REPS`] seeded repetitions. Repetition `r` draws from
/// `ChaCha8Rng::seed_from_u64(seed + r)`; horizons undefined in every
/// repetition are omitted.
pub fn timestamp_noise_protocol(
    scores: &[f64],
    delays: &[i64],
    poc_delays: &[Option<i64>],
    rho: f64,
    seed: u64,
    horizons: &[i64],
) -> Result<Vec<AucPoint>, EvalError> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(EvalError::Fraction(rho));
    }
    if scores.len() != delays.len() || delays.len() != poc_delays.len() {
        return Err(EvalError::Length(scores.len(), delays.len()));
    }
    if poc_delays.iter().all(Option::is_none) {
        return Err(EvalError::NoPocDates);
    }
    let mut sums = vec![(0.0, 0usize); horizons.len()];
    for r in 0..TIMESTAMP_NOISE_REPS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(r));
        let d = substitute_poc_delays(delays, poc_delays, rho, &mut rng);
        for (k, &t) in horizons.iter().enumerate() {
            if let Some(a) = time_varying_auc(scores, &d, t) {
                sums[k].0 += a;
                sums[k].1 += 1;
            }
        }
    }
    Ok(horizons
        .iter()
        .zip(sums)
        .filter(|(_, (_, n))| *n > 0)
        .map(|(&t, (s, n))| AucPoint {
            horizon_days: t,
            auc: s / n as f64,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    pub positives: usize,
    pub roc_auc: f64,
    pub pr_auc: f64,
    pub pr_points: Vec<PrPoint>,
    pub roc_points: Vec<RocPoint>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub prioritization: Vec<PrioPoint>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub time_varying_auc: Vec<AucPoint>,
}

impl EvalReport {
    pub fn new(scores: &[f64], labels: &[u8]) -> Result<Self, EvalError> {
        Ok(Self {
            n: scores.len(),
            positives: labels.iter().filter(|y| **y != 0).count(),
            roc_auc: auc_roc(scores, labels)?,
            pr_auc: auc_pr(scores, labels)?,
            pr_points: threshold_sweep(scores, labels)?,
            roc_points: roc_points(scores, labels)?,
            prioritization: Vec::new(),
            time_varying_auc: Vec::new(),
        })
    }

    /// PR table as CSV.
    pub fn pr_csv(&self) -> String {
        let mut s = String::from("threshold,precision,recall,tp,fp\n");
        for p in &self.pr_points {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                p.threshold, p.precision, p.recall, p.tp, p.fp
            ));
        }
        s
    }

    pub fn roc_csv(&self) -> String {
        let mut s = String::from("threshold,fpr,tpr\n");
        for p in &self.roc_points {
            s.push_str(&format!("{},{},{}\n", p.threshold, p.fpr, p.tpr));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_auc(scores: &[f64], labels: &[u8]) -> f64 {
        let mut w = 0.0;
        let mut n = 0.0;
        for (i, si) in scores.iter().enumerate() {
            for (j, sj) in scores.iter().enumerate() {
                if labels[i] == 1 && labels[j] == 0 {
                    n += 1.0;
                    w += if si > sj {
                        1.0
                    } else if si == sj {
                        0.5
                    } else {
                        0.0
                    };
                }
            }
        }
        w / n
    }

    #[test]
    fn sweep_hand_count() {
        let pts = threshold_sweep(&[0.9, 0.8, 0.7], &[1, 0, 1]).unwrap();
        let at = pts.iter().find(|p| p.threshold == 0.8).unwrap();
        assert_eq!((at.precision, at.recall), (0.5, 0.5));
        assert_eq!(pts.last().unwrap().recall, 1.0);
        assert!(matches!(threshold_sweep(&[0.1], &[0]), Err(EvalError::NoPositives)));
    }

    #[test]
    fn auc_edge_cases() {
        assert_eq!(auc_roc(&[0.3; 6], &[1, 0, 1, 0, 0, 1]).unwrap(), 0.5);
        assert_eq!(auc_roc(&[0.9, 0.8, 0.1], &[1, 1, 0]).unwrap(), 1.0);
        assert_eq!(auc_pr(&[0.9, 0.8, 0.1], &[1, 1, 0]).unwrap(), 1.0);
        assert!(matches!(auc_roc(&[0.3], &[1]), Err(EvalError::OneClass)));
    }

    #[test]
    fn static_scores_missing_count_against_recall() {
        let pts = threshold_sweep_partial(&[Some(9.0), None, Some(2.0)], &[1, 1, 0]).unwrap();
        assert_eq!(pts[0].recall, 0.5);
        assert_eq!(pts[0].precision, 1.0);
        assert_eq!(pts.last().unwrap().recall, 0.5);
    }

    #[test]
    fn prioritization_examples() {
        assert_eq!(prioritization_error(0.9, 1, &[(0.1, 0), (0.5, 0)]), Some(0.0));
        assert_eq!(prioritization_error(0.1, 1, &[(0.2, 0); 4]), Some(1.0));
        assert_eq!(prioritization_error(0.1, 1, &[]), None);
        let d = |s: &str| s.parse::<NaiveDate>().unwrap();
        let inst = vec![
            PrioInstance {
                disclosure: d("2020-01-01"),
                score: 0.9,
                label: 1,
            },
            PrioInstance {
                disclosure: d("2020-01-05"),
                score: 0.2,
                label: 0,
            },
        ];
        let c = prioritization_curve(&inst, &[0, 10]);
        assert_eq!(c[0].skipped, 2);
        assert_eq!(c[1].exploited.unwrap().mean, 0.0);
        assert_eq!(c[1].skipped, 1);
    }

    #[test]
    fn time_varying_edges() {
        assert_eq!(time_varying_auc(&[0.1, 0.2], &[1, 2], 5), None);
        assert_eq!(time_varying_auc(&[0.9, 0.5, 0.1], &[1, 20, 40], 10), Some(1.0));
        let s = [0.4, 0.7, 0.2, 0.9];
        let d = [3, 50, 200, 8];
        let base = time_varying_auc_series(&s, &d, &[10, 100]);
        let poc = [Some(1), None, Some(5), Some(2)];
        assert_eq!(
            timestamp_noise_protocol(&s, &d, &poc, 0.0, 1, &[10, 100]).unwrap(),
            base
        );
        let same: Vec<Option<i64>> = d.iter().map(|x| Some(*x)).collect();
        assert_eq!(
            timestamp_noise_protocol(&s, &d, &same, 1.0, 1, &[10, 100]).unwrap(),
            base
        );
        assert!(matches!(
            timestamp_noise_protocol(&s, &d, &[None; 4], 0.5, 1, &[10]),
            Err(EvalError::NoPocDates)
        ));
    }

    proptest! {
        #[test]
        fn roc_matches_pairwise(v in prop::collection::vec((0u8..20, 0u8..2), 2..80)) {
            let s: Vec<f64> = v.iter().map(|(a, _)| *a as f64 / 20.0).collect();
            let y: Vec<u8> = v.iter().map(|(_, b)| *b).collect();
            prop_assume!(y.contains(&0) && y.contains(&1));
            let a = auc_roc(&s, &y).unwrap();
            prop_assert!((a - brute_auc(&s, &y)).abs() < 1e-12);
            let t: Vec<f64> = s.iter().map(|x| (3.0 * x).exp()).collect();
            prop_assert_eq!(a, auc_roc(&t, &y).unwrap());
            let pr = auc_pr(&s, &y).unwrap();
            prop_assert!((0.0..=1.0).contains(&pr));
        }

        #[test]
        fn raising_exploited_score_never_hurts(s in 0.0f64..1.0, bump in 0.0f64..1.0,
                                               others in prop::collection::vec((0.0f64..1.0, 0u8..2), 1..30)) {
            let a = prioritization_error(s, 1, &others).unwrap();
            let b = prioritization_error(s + bump, 1, &others).unwrap();
            prop_assert!(b <= a);
            prop_assert!((0.0..=1.0).contains(&a));
        }
    }
}
