//! End-to-end runs: temporal splits, per-split training (optionally under
//! injected feature noise), scoring of test vulnerabilities at fixed offsets
//! after disclosure, and evaluation.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::corpus::{add_days, CorpusError, CorpusStore, ExploitTiming, LabelConfig};
use crate::eval::{self, EvalError, EvalReport, PrioInstance};
use crate::langid::{train_language_model, TokenModel, DEFAULT_ALPHA};
use crate::model::{train_rows, LossSpec, ModelError, ModelFile, Objective, TrainConfig};
use crate::noise::{self, NoiseError, NoiseSpec, PriorEstimate};
use crate::pipeline::{
    build_splits, prepare_split, CorpusAnalysis, DesignMatrix, FeaturizeConfig, Featurizer, PipelineError, SplitConfig,
    TemporalSplit, DEFAULT_SCORE_OFFSETS,
};
use crate::synth::generate_langid_corpus;

/// Prioritization windows (days) reported for every offset.
pub const PRIORITIZATION_WINDOWS: [i64; 7] = [0, 5, 10, 15, 20, 25, 30];
/// Horizons (days) of the time-varying AUC series.
pub const TV_HORIZONS: [i64; 6] = [0, 10, 30, 90, 180, 365];

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("no split had both training and test data")]
    NoUsableSplit,
    #[error("cannot write {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Training-time label noise on one feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSetup {
    /// Every training positive carrying this feature is relabeled 0.
    pub feature: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub window_start: NaiveDate,
    pub window_end: NaiveDate,
    pub split: SplitConfig,
    pub labels: LabelConfig,
    pub featurize: FeaturizeConfig,
    pub train: TrainConfig,
    /// Under noise, the class prior of LR/FC is replaced by the injected
    /// noise fraction and FFC's feature priors by the window estimate.
    pub loss: LossSpec,
    pub noise: Option<NoiseSetup>,
    pub score_offsets: Vec<i64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            window_start: NaiveDate::from_ymd_opt(2018, 1, 1).expect("valid date"),
            window_end: NaiveDate::from_ymd_opt(2020, 1, 1).expect("valid date"),
            split: SplitConfig::default(),
            labels: LabelConfig::default(),
            featurize: FeaturizeConfig::default(),
            train: TrainConfig::default(),
            loss: LossSpec::Bce,
            noise: None,
            score_offsets: DEFAULT_SCORE_OFFSETS.to_vec(),
        }
    }
}

impl ExperimentConfig {
    /// Settings sized for synthetic corpora of a few thousand vulnerabilities.
    /// The default network (500/100 units, learning rate 5e-6) barely moves
    /// from its initialization on ~1,000 training rows in 20 epochs.
    pub fn desk(seed: u64) -> Self {
        Self {
            train: TrainConfig {
                hidden: vec![32, 16],
                epochs: 40,
                learning_rate: 1e-3,
                seed,
                ..TrainConfig::default()
            },
            ..Self::default()
        }
    }
}

/// Trains a model on a design matrix, optionally with replacement labels.
pub fn train_matrix(
    m: &DesignMatrix,
    labels: Option<&[u8]>,
    loss: &LossSpec,
    cfg: &TrainConfig,
) -> Result<ModelFile, ModelError> {
    let obj = Objective::new(loss, |f| m.index.get(f))?;
    let ys = labels.unwrap_or(&m.labels);
    let out = train_rows(&m.rows, ys, m.dim(), &obj, matches!(loss, LossSpec::Lr { .. }), cfg)?;
    let mut file = ModelFile::new(out.params, loss.clone(), cfg.clone(), m.index.fingerprint());
    file.loss_trace = out.loss_trace;
    if let Some(id) = m.meta.split_id {
        file.metadata.insert("split_id".into(), id.to_string());
    }
    if let Some(t) = m.meta.train_time {
        file.metadata.insert("train_time".into(), t.to_string());
    }
    Ok(file)
}

/// Language-identification model trained on 1,000 generated files.
pub fn synthetic_langid_model(seed: u64) -> TokenModel {
    let files: Vec<(String, crate::langid::LanguageLabel)> = generate_langid_corpus(1000, seed)
        .into_iter()
        .map(|f| (f.content, f.label))
        .collect();
    train_language_model(&files, DEFAULT_ALPHA).expect("non-empty training set")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub vuln_id: String,
    pub split_id: usize,
    pub offset_days: i64,
    pub z: NaiveDate,
    pub value: f64,
    pub label: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub split_id: usize,
    pub train_time: NaiveDate,
    pub n_train: usize,
    pub n_train_positive: usize,
    pub n_test: usize,
    pub model_id: Option<String>,
    pub noise: Option<NoiseSpec>,
    pub prior: Option<PriorEstimate>,
    pub skipped: Option<String>,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub splits: Vec<SplitSummary>,
    pub models: Vec<ModelFile>,
    pub scores: Vec<ScoreRow>,
    /// Keyed by scoring offset in days.
    pub reports: BTreeMap<i64, EvalReport>,
}

struct SplitOutput {
    summary: SplitSummary,
    model: Option<ModelFile>,
    scores: Vec<ScoreRow>,
}

fn effective_loss(loss: &LossSpec, noise: Option<&NoiseSpec>, prior: Option<&PriorEstimate>) -> LossSpec {
    let Some(n) = noise else { return loss.clone() };
    match loss {
        LossSpec::Bce => LossSpec::Bce,
        LossSpec::Lr { lambda, .. } => LossSpec::Lr {
            lambda: *lambda,
            prior: n.fraction_of_negatives,
        },
        LossSpec::Fc { .. } => LossSpec::Fc {
            prior: n.fraction_of_negatives,
        },
        LossSpec::Ffc { .. } => LossSpec::Ffc {
            feature_priors: prior.map(|p| [(p.feature.clone(), p.prior)].into()).unwrap_or_default(),
        },
    }
}

/// A split's trained model together with the featurizer its rows came from.
#[derive(Debug, Clone)]
pub struct TrainedSplit {
    pub featurizer: Featurizer,
    pub model: ModelFile,
}

/// Builds the split's training matrix and trains on it (under the configured
/// noise, if any). Returns no model when the split cannot be trained; the
/// summary then says why.
pub fn train_split(
    store: &CorpusStore,
    analysis: &CorpusAnalysis,
    split: &TemporalSplit,
    cfg: &ExperimentConfig,
) -> Result<(SplitSummary, Option<TrainedSplit>), ExperimentError> {
    let mut summary = SplitSummary {
        split_id: split.id,
        train_time: split.train_time,
        n_train: split.train_ids.len(),
        n_train_positive: 0,
        n_test: split.test_ids.len(),
        model_id: None,
        noise: None,
        prior: None,
        skipped: None,
    };
    if split.train_ids.is_empty() || split.test_ids.is_empty() {
        summary.skipped = Some("empty training or test set".into());
        return Ok((summary, None));
    }
    let prepared = prepare_split(store, analysis, split, &cfg.labels, &cfg.featurize)?;
    summary.n_train_positive = prepared.train.positives();
    if summary.n_train_positive == 0 {
        summary.skipped = Some("no positive training vulnerabilities".into());
        return Ok((summary, None));
    }
    let mut labels = None;
    if let Some(setup) = &cfg.noise {
        let (noisy, spec) = noise::inject_matrix_noise(&prepared.train, &setup.feature)?;
        if matches!(cfg.loss, LossSpec::Ffc { .. }) {
            match noise::estimate_feature_prior(store, &setup.feature, split.train_time, &cfg.labels) {
                Ok(p) => summary.prior = Some(p),
                Err(NoiseError::EmptyWindow { .. }) => {
                    log::warn!("split {}: no {} instances in the prior window", split.id, setup.feature)
                }
                Err(e) => return Err(e.into()),
            }
        }
        labels = Some(noisy);
        summary.noise = Some(spec);
    }
    let loss = effective_loss(&cfg.loss, summary.noise.as_ref(), summary.prior.as_ref());
    let model = train_matrix(&prepared.train, labels.as_deref(), &loss, &cfg.train)?;
    summary.model_id = Some(model.model_id());
    Ok((
        summary,
        Some(TrainedSplit {
            featurizer: prepared.featurizer,
            model,
        }),
    ))
}

/// Scores every test vulnerability of the split at each offset after its
/// disclosure.
pub fn score_split(
    store: &CorpusStore,
    analysis: &CorpusAnalysis,
    split: &TemporalSplit,
    trained: &TrainedSplit,
    cfg: &ExperimentConfig,
) -> Result<Vec<ScoreRow>, ExperimentError> {
    let mut scores = Vec::new();
    for id in &split.test_ids {
        let delta = store.estimate_disclosure(id)?;
        let label = store.label(id, &cfg.labels)?;
        for &off in &cfg.score_offsets {
            let z = add_days(delta, off);
            let row = trained.featurizer.row(analysis, store, id, z)?;
            let s = trained.model.score(id, z, &row)?;
            scores.push(ScoreRow {
                vuln_id: id.clone(),
                split_id: split.id,
                offset_days: off,
                z,
                value: s.value,
                label,
            });
        }
    }
    Ok(scores)
}

fn run_split(
    store: &CorpusStore,
    analysis: &CorpusAnalysis,
    split: &TemporalSplit,
    cfg: &ExperimentConfig,
) -> Result<SplitOutput, ExperimentError> {
    let (summary, trained) = train_split(store, analysis, split, cfg)?;
    let Some(trained) = trained else {
        return Ok(SplitOutput {
            summary,
            model: None,
            scores: Vec::new(),
        });
    };
    let scores = score_split(store, analysis, split, &trained, cfg)?;
    Ok(SplitOutput {
        summary,
        model: Some(trained.model),
        scores,
    })
}

/// Report for the scores at one offset. Time-varying AUC uses the exploited
/// instances with a dated exploit on or after disclosure.
pub fn report_for(store: &CorpusStore, rows: &[&ScoreRow]) -> Result<EvalReport, ExperimentError> {
    let scores: Vec<f64> = rows.iter().map(|r| r.value).collect();
    let labels: Vec<u8> = rows.iter().map(|r| r.label).collect();
    let mut report = EvalReport::new(&scores, &labels)?;
    let mut prio = Vec::with_capacity(rows.len());
    let (mut tv_scores, mut tv_delays) = (Vec::new(), Vec::new());
    for r in rows {
        let delta = store.estimate_disclosure(&r.vuln_id)?;
        prio.push(PrioInstance {
            disclosure: delta,
            score: r.value,
            label: r.label,
        });
        if let ExploitTiming::Dated(d) = store.estimate_exploit_date(&r.vuln_id) {
            if r.label == 1 {
                tv_scores.push(r.value);
                tv_delays.push((d - delta).num_days());
            }
        }
    }
    report.prioritization = eval::prioritization_curve(&prio, &PRIORITIZATION_WINDOWS);
    report.time_varying_auc = eval::time_varying_auc_series(&tv_scores, &tv_delays, &TV_HORIZONS);
    Ok(report)
}

/// Runs every split of the configured window. Splits train concurrently;
/// each training run is single-threaded, so results do not depend on
/// scheduling.
pub fn run_experiment(
    store: &CorpusStore,
    analysis: &CorpusAnalysis,
    cfg: &ExperimentConfig,
) -> Result<ExperimentResult, ExperimentError> {
    let splits = build_splits(store, cfg.window_start, cfg.window_end, &cfg.split)?;
    let outputs: Vec<Result<SplitOutput, ExperimentError>> = std::thread::scope(|s| {
        let handles: Vec<_> = splits
            .iter()
            .map(|sp| s.spawn(move || run_split(store, analysis, sp, cfg)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("split worker panicked"))
            .collect()
    });
    let mut summaries = Vec::new();
    let mut models = Vec::new();
    let mut scores = Vec::new();
    for o in outputs {
        let o = o?;
        summaries.push(o.summary);
        models.extend(o.model);
        scores.extend(o.scores);
    }
    assemble_result(store, summaries, models, scores, &cfg.score_offsets)
}

/// Sorts the scores and builds one report per offset.
pub fn assemble_result(
    store: &CorpusStore,
    splits: Vec<SplitSummary>,
    models: Vec<ModelFile>,
    mut scores: Vec<ScoreRow>,
    offsets: &[i64],
) -> Result<ExperimentResult, ExperimentError> {
    if models.is_empty() {
        return Err(ExperimentError::NoUsableSplit);
    }
    scores.sort_by(|a, b| (a.offset_days, &a.vuln_id).cmp(&(b.offset_days, &b.vuln_id)));
    let mut reports = BTreeMap::new();
    for &off in offsets {
        let rows: Vec<&ScoreRow> = scores.iter().filter(|r| r.offset_days == off).collect();
        reports.insert(off, report_for(store, &rows)?);
    }
    Ok(ExperimentResult {
        splits,
        models,
        scores,
        reports,
    })
}

impl ExperimentResult {
    pub fn roc_auc(&self, offset: i64) -> Option<f64> {
        self.reports.get(&offset).map(|r| r.roc_auc)
    }

    /// Writes `splits.json`, `scores.jsonl`, `models/split-<k>.json` and
    /// `report.d<offset>.json` plus PR/ROC CSV tables into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), ExperimentError> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| ExperimentError::Io { path, source }
        };
        let models = dir.join("models");
        std::fs::create_dir_all(&models).map_err(io(&models))?;
        let p = dir.join("splits.json");
        std::fs::write(&p, serde_json::to_vec_pretty(&self.splits).expect("serializable")).map_err(io(&p))?;
        let mut lines = String::new();
        for s in &self.scores {
            lines.push_str(&serde_json::to_string(s).expect("serializable"));
            lines.push('\n');
        }
        let p = dir.join("scores.jsonl");
        std::fs::write(&p, lines).map_err(io(&p))?;
        for m in &self.models {
            let id = m.metadata.get("split_id").cloned().unwrap_or_else(|| m.model_id());
            m.save(&models.join(format!("split-{id}.json")))?;
        }
        for (off, r) in &self.reports {
            let p = dir.join(format!("report.d{off}.json"));
            std::fs::write(&p, serde_json::to_vec_pretty(r).expect("serializable")).map_err(io(&p))?;
            let p = dir.join(format!("pr.d{off}.csv"));
            std::fs::write(&p, r.pr_csv()).map_err(io(&p))?;
            let p = dir.join(format!("roc.d{off}.csv"));
            std::fs::write(&p, r.roc_csv()).map_err(io(&p))?;
        }
        Ok(())
    }
}
