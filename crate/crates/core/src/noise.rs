//! Feature-dependent label noise: injection, prior estimation from a clean
//! window, and chi-squared tests of evidence-source bias.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::corpus::{add_days, CorpusError, CorpusStore, LabelConfig, VulnRecord};
use crate::pipeline::{DesignMatrix, FeatureIndex};
use crate::vulnfeat::{normalize_cwe, normalize_product, NS_CPE, NS_CWE};

/// Length of the prior-estimation window after the training time.
pub const PRIOR_WINDOW_DAYS: i64 = 180;
/// Family-wise significance level of the source-bias tests.
pub const CHI2_ALPHA: f64 = 0.01;

#[derive(Debug, thiserror::Error)]
pub enum NoiseError {
    #[error("feature {0} is not in the feature space")]
    UnknownFeature(String),
    #[error("feature {0} cannot be read from vulnerability records (only cwe: and cpe: features can)")]
    UnsupportedFeature(String),
    #[error("no vulnerability with {feature} was disclosed in [{start}, {end})")]
    EmptyWindow {
        feature: String,
        start: NaiveDate,
        end: NaiveDate,
    },
    #[error("{0} rows but {1} labels")]
    Length(usize, usize),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub feature: String,
    /// Positives relabeled as negatives.
    pub flipped: usize,
    pub positives_before: usize,
    pub negatives_before: usize,
    /// `flipped / negatives after flipping`: the share of negatives that are noisy.
    pub fraction_of_negatives: f64,
    /// `flipped / negatives before flipping`.
    pub fraction_of_clean_negatives: f64,
    /// `flipped / positives before flipping`.
    pub fraction_of_positives: f64,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Relabels as negative every row that has `feature` (non-zero entry).
/// Negatives are never changed.
pub fn inject_feature_noise(
    labels: &[u8],
    rows: &[Vec<(usize, f64)>],
    index: &FeatureIndex,
    feature: &str,
) -> Result<(Vec<u8>, NoiseSpec), NoiseError> {
    if labels.len() != rows.len() {
        return Err(NoiseError::Length(rows.len(), labels.len()));
    }
    let f = index
        .get(feature)
        .ok_or_else(|| NoiseError::UnknownFeature(feature.to_string()))?;
    let has = |r: &Vec<(usize, f64)>| r.iter().any(|(i, x)| *i == f && *x != 0.0);
    let positives = labels.iter().filter(|y| **y != 0).count();
    let negatives = labels.len() - positives;
    let mut flipped = 0;
    let noisy: Vec<u8> = labels
        .iter()
        .zip(rows)
        .map(|(y, r)| {
            if *y != 0 && has(r) {
                flipped += 1;
                0
            } else {
                *y
            }
        })
        .collect();
    if positives > 0 && flipped == positives {
        log::warn!("every positive carries {feature}; all labels are now 0");
    }
    Ok((
        noisy,
        NoiseSpec {
            feature: feature.to_string(),
            flipped,
            positives_before: positives,
            negatives_before: negatives,
            fraction_of_negatives: ratio(flipped, negatives + flipped),
            fraction_of_clean_negatives: ratio(flipped, negatives),
            fraction_of_positives: ratio(flipped, positives),
        },
    ))
}

/// [`inject_feature_noise`] applied to a design matrix's labels.
pub fn inject_matrix_noise(m: &DesignMatrix, feature: &str) -> Result<(Vec<u8>, NoiseSpec), NoiseError> {
    inject_feature_noise(&m.labels, &m.rows, &m.index, feature)
}

/// Whether a record carries a structured feature, ignoring publication dates.
pub fn record_has_feature(v: &VulnRecord, feature: &str) -> Result<bool, NoiseError> {
    match feature.split_once(':') {
        Some((ns, val)) if ns == NS_CWE => Ok(v.cwe_ids.iter().any(|c| normalize_cwe(c) == val)),
        Some((ns, val)) if ns == NS_CPE => Ok(v.products.iter().any(|p| normalize_product(p) == val)),
        _ => Err(NoiseError::UnsupportedFeature(feature.to_string())),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorEstimate {
    pub feature: String,
    pub prior: f64,
    pub n_instances: usize,
    pub n_exploited: usize,
    pub window_start: NaiveDate,
    /// Exclusive.
    pub window_end: NaiveDate,
}

/// Share of exploited instances among `(has_feature, clean_label)` pairs
/// that have the feature.
pub fn estimate_prior_from(
    feature: &str,
    instances: impl IntoIterator<Item = (bool, u8)>,
    window_start: NaiveDate,
    window_end: NaiveDate,
) -> Result<PriorEstimate, NoiseError> {
    let (mut n, mut pos) = (0usize, 0usize);
    for (has, y) in instances {
        if has {
            n += 1;
            pos += usize::from(y != 0);
        }
    }
    if n == 0 {
        return Err(NoiseError::EmptyWindow {
            feature: feature.to_string(),
            start: window_start,
            end: window_end,
        });
    }
    Ok(PriorEstimate {
        feature: feature.to_string(),
        prior: pos as f64 / n as f64,
        n_instances: n,
        n_exploited: pos,
        window_start,
        window_end,
    })
}

/// Estimates `p̃_f` from the vulnerabilities disclosed in
/// `[train_time, train_time + PRIOR_WINDOW_DAYS)` using the store's labels,
/// which must be clean.
pub fn estimate_feature_prior(
    store: &CorpusStore,
    feature: &str,
    train_time: NaiveDate,
    labels: &LabelConfig,
) -> Result<PriorEstimate, NoiseError> {
    let end = add_days(train_time, PRIOR_WINDOW_DAYS);
    let mut instances = Vec::new();
    for v in store.vulns() {
        let Ok(d) = store.estimate_disclosure(&v.id) else {
            continue;
        };
        if d >= train_time && d < end {
            instances.push((record_has_feature(v, feature)?, store.label(&v.id, labels)?));
        }
    }
    estimate_prior_from(feature, instances, train_time, end)
}

/// 2×2 counts: `table[has_feature][has_evidence]`, index 1 meaning yes.
pub type Table2x2 = [[u64; 2]; 2];

/// Pearson statistic and p-value (1 degree of freedom), or `None` when a
/// marginal is zero.
pub fn chi2_2x2(t: &Table2x2, yates: bool) -> Option<(f64, f64)> {
    let rows = [t[0][0] + t[0][1], t[1][0] + t[1][1]];
    let cols = [t[0][0] + t[1][0], t[0][1] + t[1][1]];
    let n = (rows[0] + rows[1]) as f64;
    if rows.contains(&0) || cols.contains(&0) {
        return None;
    }
    let mut stat = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let e = rows[i] as f64 * cols[j] as f64 / n;
            let mut dev = (t[i][j] as f64 - e).abs();
            if yates {
                dev = (dev - 0.5).max(0.0);
            }
            stat += dev * dev / e;
        }
    }
    let p = ChiSquared::new(1.0).expect("valid dof").sf(stat);
    Some((stat, p))
}

/// Feature presence against evidence from `source`, over all vulnerabilities.
pub fn contingency(store: &CorpusStore, source: &str, feature: &str) -> Result<Table2x2, NoiseError> {
    let mut t = [[0u64; 2]; 2];
    for v in store.vulns() {
        let f = usize::from(record_has_feature(v, feature)?);
        let e = usize::from(store.evidence(&v.id).iter().any(|e| e.source == source));
        t[f][e] += 1;
    }
    Ok(t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Chi2Outcome {
    Tested { statistic: f64, p_value: f64, reject: bool },
    Untestable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chi2Result {
    pub source: String,
    pub feature: String,
    pub table: Table2x2,
    #[serde(flatten)]
    pub outcome: Chi2Outcome,
}

/// Tests every (source, feature) pair for independence, rejecting at
/// `alpha / m` where `m` is the number of testable pairs.
pub fn chi2_batch(
    store: &CorpusStore,
    pairs: &[(String, String)],
    alpha: f64,
    yates: bool,
) -> Result<Vec<Chi2Result>, NoiseError> {
    let tables: Vec<Table2x2> = pairs
        .iter()
        .map(|(s, f)| contingency(store, s, f))
        .collect::<Result<_, _>>()?;
    let stats: Vec<Option<(f64, f64)>> = tables.iter().map(|t| chi2_2x2(t, yates)).collect();
    let m = stats.iter().filter(|s| s.is_some()).count().max(1) as f64;
    Ok(pairs
        .iter()
        .zip(tables)
        .zip(stats)
        .map(|(((source, feature), table), st)| Chi2Result {
            source: source.clone(),
            feature: feature.clone(),
            table,
            outcome: match st {
                Some((statistic, p_value)) => Chi2Outcome::Tested {
                    statistic,
                    p_value,
                    reject: p_value < alpha / m,
                },
                None => Chi2Outcome::Untestable,
            },
        })
        .collect())
}

/// Single test of `feature` against `source` (no multiple-test correction).
pub fn chi2_independence(store: &CorpusStore, source: &str, feature: &str) -> Result<Chi2Result, NoiseError> {
    Ok(chi2_batch(store, &[(source.to_string(), feature.to_string())], CHI2_ALPHA, false)?.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{EvidenceKind, ExploitEvidence};
    use proptest::prelude::*;

    fn index() -> FeatureIndex {
        FeatureIndex::new(["cwe:89".to_string(), "cwe:79".to_string()])
    }

    #[test]
    fn injection_counts() {
        let idx = index();
        let f = idx.get("cwe:89").unwrap();
        let g = idx.get("cwe:79").unwrap();
        // 50 positives (10 with f), 100 negatives (some with f)
        let mut rows = Vec::new();
        let mut ys = Vec::new();
        for i in 0..50 {
            rows.push(if i < 10 { vec![(f, 1.0)] } else { vec![(g, 1.0)] });
            ys.push(1);
        }
        for i in 0..100 {
            rows.push(if i < 30 { vec![(f, 1.0)] } else { vec![] });
            ys.push(0);
        }
        let (noisy, spec) = inject_feature_noise(&ys, &rows, &idx, "cwe:89").unwrap();
        assert_eq!(spec.flipped, 10);
        assert!((spec.fraction_of_negatives - 10.0 / 110.0).abs() < 1e-12);
        assert_eq!(spec.fraction_of_clean_negatives, 0.1);
        assert_eq!(noisy.iter().filter(|y| **y == 1).count(), 40);
        let (same, spec) = inject_feature_noise(&ys[10..], &rows[10..], &idx, "cwe:89").unwrap();
        assert_eq!((same.as_slice(), spec.flipped), (&ys[10..], 0));
        let (all0, _) = inject_feature_noise(&[1, 1], &[vec![(f, 1.0)], vec![(f, 1.0)]], &idx, "cwe:89").unwrap();
        assert_eq!(all0, vec![0, 0]);
        assert!(matches!(
            inject_feature_noise(&ys, &rows, &idx, "cwe:1"),
            Err(NoiseError::UnknownFeature(_))
        ));
    }

    #[test]
    fn prior_examples() {
        let d = |s: &str| s.parse::<NaiveDate>().unwrap();
        let (a, b) = (d("2019-01-01"), d("2019-06-30"));
        let inst = (0..22)
            .map(|i| (true, u8::from(i < 21)))
            .chain((0..5).map(|_| (false, 1)));
        let e = estimate_prior_from("cwe:89", inst, a, b).unwrap();
        assert_eq!((e.n_instances, e.n_exploited), (22, 21));
        assert!((e.prior - 0.95).abs() <= 0.005);
        let e = estimate_prior_from("cpe:linux", (0..4).map(|i| (true, u8::from(i < 2))), a, b).unwrap();
        assert_eq!(e.prior, 0.5);
        assert_eq!(
            estimate_prior_from("f", [(true, 0), (true, 0)], a, b).unwrap().prior,
            0.0
        );
        assert!(estimate_prior_from("f", [(false, 1)], a, b).is_err());
    }

    #[test]
    fn chi2_closed_forms() {
        let (s, p) = chi2_2x2(&[[50, 0], [0, 50]], false).unwrap();
        assert!((s - 100.0).abs() < 1e-9);
        assert!(p < 1e-20);
        let (s, p) = chi2_2x2(&[[20, 30], [40, 60]], false).unwrap();
        assert!(s.abs() < 1e-12 && (p - 1.0).abs() < 1e-12);
        assert!(chi2_2x2(&[[0, 0], [3, 4]], false).is_none());
        let (sy, _) = chi2_2x2(&[[50, 0], [0, 50]], true).unwrap();
        assert!(sy < 100.0);
    }

    #[test]
    fn store_level_tests() {
        let mut store = CorpusStore::new();
        for i in 0..40 {
            let mut v = VulnRecord::new(format!("CVE-{i}"));
            if i % 2 == 0 {
                v.cwe_ids = vec!["CWE-22".into()];
            }
            store.add_vuln(v);
            if i < 20 {
                store
                    .add_evidence(ExploitEvidence {
                        vuln_id: format!("CVE-{i}"),
                        source: "wild".into(),
                        kind: EvidenceKind::InTheWild,
                        date: None,
                    })
                    .unwrap();
            }
        }
        let r = chi2_independence(&store, "wild", "cwe:22").unwrap();
        assert_eq!(r.table, [[10, 10], [10, 10]]);
        assert!(matches!(r.outcome, Chi2Outcome::Tested { reject: false, .. }));
        let r = chi2_independence(&store, "nowhere", "cwe:22").unwrap();
        assert_eq!(r.outcome, Chi2Outcome::Untestable);
        assert!(chi2_independence(&store, "wild", "writeup:x").is_err());
    }

    proptest! {
        #[test]
        fn chi2_transpose_invariant(a in 1u64..200, b in 1u64..200, c in 1u64..200, d in 1u64..200) {
            let x = chi2_2x2(&[[a, b], [c, d]], false).unwrap();
            let y = chi2_2x2(&[[a, c], [b, d]], false).unwrap();
            prop_assert!((x.0 - y.0).abs() <= 1e-9 * x.0.max(1.0));
        }

        #[test]
        fn injection_never_creates_positives(ys in prop::collection::vec(0u8..2, 1..60), mask in prop::collection::vec(any::<bool>(), 60)) {
            let idx = index();
            let rows: Vec<Vec<(usize, f64)>> = ys.iter().enumerate().map(|(i, _)| if mask[i] { vec![(0, 1.0)] } else { vec![] }).collect();
            let (noisy, _) = inject_feature_noise(&ys, &rows, &idx, idx.id(0)).unwrap();
            for (a, b) in ys.iter().zip(&noisy) {
                prop_assert!(*b <= *a);
            }
        }
    }
}
