use chrono::{Months, NaiveDate};
use serde::{Deserialize, Serialize};

use super::analysis::{CorpusAnalysis, FeaturizeConfig};
use super::features::{build_vocabs, featurize, FeatureIndex, Featurizer, Scaler};
use super::matrix::{DesignMatrix, MatrixMeta, RowId, MATRIX_FORMAT_VERSION};
use super::PipelineError;
use crate::corpus::{add_days, CorpusStore, LabelConfig};

/// Scoring offsets (days after disclosure) used for evaluation by default.
pub const DEFAULT_SCORE_OFFSETS: [i64; 4] = [0, 10, 30, 365];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    /// Retraining interval in calendar months.
    pub cadence_months: u32,
    /// Vulnerabilities disclosed within this many days before the training
    /// time are left out of training, so their labels are fully observed.
    pub blackout_days: i64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            cadence_months: 6,
            blackout_days: 365,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemporalSplit {
    pub id: usize,
    pub train_time: NaiveDate,
    /// Exclusive end of the test window.
    pub test_end: NaiveDate,
    /// Disclosed on or before `train_time − blackout`.
    pub train_ids: Vec<String>,
    /// Disclosed in `[train_time, test_end)`.
    pub test_ids: Vec<String>,
}

/// Training times at `start`, `start + cadence`, … while before `end`. Each
/// test window runs to the next training time (capped at `end`), so every
/// test vulnerability is scored by the latest model trained before its
/// disclosure. Undatable vulnerabilities are skipped.
pub fn build_splits(
    store: &CorpusStore,
    start: NaiveDate,
    end: NaiveDate,
    cfg: &SplitConfig,
) -> Result<Vec<TemporalSplit>, PipelineError> {
    if start >= end {
        return Err(PipelineError::InvalidWindow { start, end });
    }
    if cfg.cadence_months == 0 {
        return Err(PipelineError::InvalidWindow { start, end: start });
    }
    let dated: Vec<(String, NaiveDate)> = store
        .vuln_ids()
        .filter_map(|id| store.estimate_disclosure(id).ok().map(|d| (id.to_string(), d)))
        .collect();
    if !dated.iter().any(|(_, d)| *d >= start && *d < end) {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    let mut k = 0u32;
    loop {
        let t = start + Months::new(cfg.cadence_months * k);
        if t >= end {
            break;
        }
        let next = (start + Months::new(cfg.cadence_months * (k + 1))).min(end);
        let cutoff = add_days(t, -cfg.blackout_days);
        out.push(TemporalSplit {
            id: k as usize,
            train_time: t,
            test_end: next,
            train_ids: dated
                .iter()
                .filter(|(_, d)| *d <= cutoff)
                .map(|(id, _)| id.clone())
                .collect(),
            test_ids: dated
                .iter()
                .filter(|(_, d)| *d >= t && *d < next)
                .map(|(id, _)| id.clone())
                .collect(),
        });
        k += 1;
    }
    Ok(out)
}

/// A split's featurizer and its training matrix.
#[derive(Debug, Clone)]
pub struct PreparedSplit {
    pub featurizer: Featurizer,
    pub train: DesignMatrix,
}

/// Builds vocabularies, scaler and feature index from the split's training
/// vulnerabilities only, and featurizes them at the training time.
pub fn prepare_split(
    store: &CorpusStore,
    analysis: &CorpusAnalysis,
    split: &TemporalSplit,
    labels: &LabelConfig,
    cfg: &FeaturizeConfig,
) -> Result<PreparedSplit, PipelineError> {
    let t = split.train_time;
    let vocabs = build_vocabs(analysis, store, &split.train_ids, t, cfg);
    let mut raw = Vec::with_capacity(split.train_ids.len());
    for id in &split.train_ids {
        raw.push((
            id,
            featurize(analysis, store, id, t, &vocabs)?,
            store.label(id, labels)?,
        ));
    }
    let scaler = Scaler::fit(raw.iter().map(|(_, v, _)| v));
    let mut ids = vocabs.feature_ids();
    ids.extend(scaler.ranges.keys().cloned());
    let index = FeatureIndex::new(ids);
    let meta = MatrixMeta {
        format_version: MATRIX_FORMAT_VERSION,
        split_id: Some(split.id),
        train_time: Some(t),
        vocab_fingerprints: vocabs.fingerprints(),
        index_fingerprint: index.fingerprint(),
    };
    let mut train = DesignMatrix::new(index.clone(), meta);
    for (id, v, y) in raw {
        train.push(
            RowId {
                vuln_id: id.clone(),
                z: t,
            },
            index.encode(&scaler.apply(&v)),
            y,
        );
    }
    Ok(PreparedSplit {
        featurizer: Featurizer { vocabs, scaler, index },
        train,
    })
}
