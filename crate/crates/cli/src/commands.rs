use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use ee_core::corpus::{CorpusStore, IngestReport};
use ee_core::eval::{precision_at_recall, EvalReport};
use ee_core::experiment::{
    assemble_result, run_experiment, score_split, synthetic_langid_model, train_split, ExperimentConfig, NoiseSetup,
    SplitSummary, TrainedSplit,
};
use ee_core::langid::{train_language_model, LanguageLabel, TokenModel, DEFAULT_ALPHA};
use ee_core::model::{LossSpec, ModelFile};
use ee_core::noise::{chi2_batch, Chi2Outcome};
use ee_core::pipeline::{analyze_corpus, analyze_vuln, build_splits, prepare_split, CorpusAnalysis, Featurizer};
use ee_core::synth::{generate, generate_langid_corpus};
use ee_core::vulnfeat::{build_structured_vocab, normalize_cwe, normalize_product, NS_CPE, NS_CWE};

use crate::config::RunConfig;
use crate::manifest::Run;

/// Seed of the built-in language-identification model.
const BUILTIN_LANGID_SEED: u64 = 1;

fn load_store(cfg: &RunConfig, run: &mut Run) -> Result<(CorpusStore, Vec<IngestReport>)> {
    let dir = &cfg.corpus_dir;
    if !dir.is_dir() {
        bail!("corpus directory {} does not exist", dir.display());
    }
    for f in ["vulns.jsonl", "artifacts.jsonl", "evidence.jsonl"] {
        let p = dir.join(f);
        if p.is_file() {
            run.input(&p)?;
        }
    }
    let (store, reports) =
        CorpusStore::load_dir(dir, &cfg.ingest).with_context(|| format!("loading corpus from {}", dir.display()))?;
    for r in &reports {
        for d in &r.diagnostics {
            log::warn!("{}:{}: {}", r.path, d.line, d.message);
        }
    }
    Ok((store, reports))
}

fn load_langid(cfg: &RunConfig, run: &mut Run) -> Result<TokenModel> {
    match &cfg.langid_model {
        Some(p) => {
            run.input(p)?;
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(TokenModel::from_json(&text)?)
        }
        None => Ok(synthetic_langid_model(BUILTIN_LANGID_SEED)),
    }
}

fn analyze(cfg: &RunConfig, run: &mut Run) -> Result<(CorpusStore, CorpusAnalysis)> {
    let (store, _) = load_store(cfg, run)?;
    let lid = load_langid(cfg, run)?;
    let analysis = analyze_corpus(&store, &lid, &cfg.experiment.featurize);
    Ok((store, analysis))
}

fn done(run: Run) -> Result<()> {
    let m = run.finish()?;
    log::info!("manifest {}", m.display());
    eprintln!("wrote {}", m.display());
    Ok(())
}

// ------------------------------------------------------------ synth-gen

pub fn synth_gen(cfg: &RunConfig, run: Run) -> Result<()> {
    let mut run = run;
    let out = generate(&cfg.synth)?;
    out.write(&cfg.out_dir)?;
    for f in ["vulns.jsonl", "artifacts.jsonl", "evidence.jsonl", "trace.json"] {
        run.output(&cfg.out_dir.join(f))?;
    }
    eprintln!(
        "{} vulnerabilities, {} artifacts, {} evidence records",
        out.store.len(),
        out.store.artifact_count(),
        out.store.evidence_count()
    );
    done(run)
}

// ------------------------------------------------------------ ingest

#[derive(Serialize)]
struct LifecycleRow<'a> {
    vuln_id: &'a str,
    disclosure: Option<NaiveDate>,
    exploit_date: Option<NaiveDate>,
    zero_day: bool,
    label: Option<u8>,
}

#[derive(Serialize)]
struct IngestSummary {
    vulns: usize,
    artifacts: usize,
    evidence: usize,
    undatable: usize,
    positives: usize,
    sources: Vec<String>,
    files: Vec<IngestReport>,
}

pub fn ingest(cfg: &RunConfig, mut run: Run) -> Result<()> {
    let (store, reports) = load_store(cfg, &mut run)?;
    let mut lines = String::new();
    let (mut undatable, mut positives) = (0, 0);
    for id in store.vuln_ids() {
        let disclosure = store.estimate_disclosure(id).ok();
        let timing = store.estimate_exploit_date(id);
        let label = store.label(id, &cfg.experiment.labels).ok();
        undatable += usize::from(disclosure.is_none());
        positives += usize::from(label == Some(1));
        let row = LifecycleRow {
            vuln_id: id,
            disclosure,
            exploit_date: timing.date(),
            zero_day: matches!(timing, ee_core::corpus::ExploitTiming::ZeroDay(_)),
            label,
        };
        lines.push_str(&serde_json::to_string(&row)?);
        lines.push('\n');
    }
    let summary = IngestSummary {
        vulns: store.len(),
        artifacts: store.artifact_count(),
        evidence: store.evidence_count(),
        undatable,
        positives,
        sources: store.sources(),
        files: reports,
    };
    let skipped: usize = summary.files.iter().map(|r| r.skipped).sum();
    eprintln!(
        "{} vulnerabilities ({} exploited, {} undatable), {} artifacts, {} evidence records, {} lines skipped",
        summary.vulns, summary.positives, summary.undatable, summary.artifacts, summary.evidence, skipped
    );
    let p = run.path("lifecycle.jsonl");
    run.write(&p, lines.as_bytes())?;
    let p = run.path("json");
    run.write_json(&p, &summary)?;
    done(run)
}

// ------------------------------------------------------------ langid-train

#[derive(Deserialize)]
struct LabeledLine {
    content: String,
    label: String,
}

pub fn langid_train(cfg: &RunConfig, labeled: Option<&Path>, n_synthetic: usize, mut run: Run) -> Result<()> {
    let files: Vec<(String, LanguageLabel)> = match labeled {
        Some(p) => {
            run.input(p)?;
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let mut files = Vec::new();
            for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
                let l: LabeledLine =
                    serde_json::from_str(line).with_context(|| format!("{}:{}", p.display(), i + 1))?;
                let label = LanguageLabel::from_slug(&l.label)
                    .ok_or_else(|| anyhow!("{}:{}: unknown language {:?}", p.display(), i + 1, l.label))?;
                files.push((l.content, label));
            }
            files
        }
        None => generate_langid_corpus(n_synthetic, cfg.seed.unwrap_or(BUILTIN_LANGID_SEED))
            .into_iter()
            .map(|f| (f.content, f.label))
            .collect(),
    };
    let model = train_language_model(&files, DEFAULT_ALPHA)?;
    eprintln!("trained on {} files, {} classes", files.len(), model.classes.len());
    let p = run.path("json");
    run.write(&p, model.to_json().as_bytes())?;
    done(run)
}

// ------------------------------------------------------------ featurize

#[derive(Serialize)]
struct FeaturizedSplit {
    split_id: usize,
    train_time: NaiveDate,
    test_end: NaiveDate,
    n_train: usize,
    n_test: usize,
    positives: usize,
    dim: usize,
    dir: Option<String>,
}

pub fn featurize(cfg: &RunConfig, mut run: Run) -> Result<()> {
    let (store, analysis) = analyze(cfg, &mut run)?;
    let e = &cfg.experiment;
    let splits = build_splits(&store, e.window_start, e.window_end, &e.split)?;
    if splits.is_empty() {
        bail!("no vulnerabilities disclosed in [{}, {})", e.window_start, e.window_end);
    }
    let dir = run.dir()?;
    let mut rows = Vec::new();
    for s in &splits {
        let mut entry = FeaturizedSplit {
            split_id: s.id,
            train_time: s.train_time,
            test_end: s.test_end,
            n_train: s.train_ids.len(),
            n_test: s.test_ids.len(),
            positives: 0,
            dim: 0,
            dir: None,
        };
        if s.train_ids.is_empty() {
            log::warn!("split {}: no training vulnerabilities", s.id);
            rows.push(entry);
            continue;
        }
        let prep = prepare_split(&store, &analysis, s, &e.labels, &e.featurize)?;
        let sub = dir.join(format!("split-{}", s.id));
        prep.train.save(&sub)?;
        let mut f = serde_json::to_vec(&prep.featurizer)?;
        f.push(b'\n');
        std::fs::write(sub.join("featurizer.json"), f)?;
        entry.positives = prep.train.positives();
        entry.dim = prep.train.dim();
        entry.dir = Some(sub.file_name().unwrap().to_string_lossy().into_owned());
        rows.push(entry);
    }
    run.output(&dir)?;
    let p = run.path("json");
    run.write_json(&p, &rows)?;
    eprintln!("{} splits featurized into {}", rows.len(), dir.display());
    done(run)
}

// ------------------------------------------------------------ train

/// Contents of `index.json` in a `train` output directory.
#[derive(Debug, Serialize, Deserialize)]
pub struct TrainIndex {
    pub config_hash: String,
    pub splits: Vec<TrainEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TrainEntry {
    pub summary: SplitSummary,
    pub test_end: NaiveDate,
    pub model: Option<String>,
    pub featurizer: Option<String>,
}

pub fn train(cfg: &RunConfig, mut run: Run) -> Result<()> {
    let (store, analysis) = analyze(cfg, &mut run)?;
    let e = &cfg.experiment;
    let splits = build_splits(&store, e.window_start, e.window_end, &e.split)?;
    if splits.is_empty() {
        bail!("no vulnerabilities disclosed in [{}, {})", e.window_start, e.window_end);
    }
    let results: Vec<_> = std::thread::scope(|sc| {
        let hs: Vec<_> = splits
            .iter()
            .map(|s| {
                let (store, analysis) = (&store, &analysis);
                sc.spawn(move || train_split(store, analysis, s, e))
            })
            .collect();
        hs.into_iter()
            .map(|h| h.join().expect("training worker panicked"))
            .collect()
    });
    let dir = run.dir()?;
    let mut index = TrainIndex {
        config_hash: run.hash.clone(),
        splits: Vec::new(),
    };
    for (s, r) in splits.iter().zip(results) {
        let (summary, trained) = r?;
        let mut entry = TrainEntry {
            summary,
            test_end: s.test_end,
            model: None,
            featurizer: None,
        };
        match trained {
            Some(t) => {
                let m = format!("split-{}.model.json", s.id);
                let f = format!("split-{}.featurizer.json", s.id);
                t.model.save(&dir.join(&m))?;
                let mut bytes = serde_json::to_vec(&t.featurizer)?;
                bytes.push(b'\n');
                std::fs::write(dir.join(&f), bytes)?;
                eprintln!(
                    "split {} (T={}): {} training rows, model {}",
                    s.id,
                    s.train_time,
                    entry.summary.n_train,
                    t.model.model_id()
                );
                entry.model = Some(m);
                entry.featurizer = Some(f);
            }
            None => eprintln!(
                "split {} (T={}): skipped, {}",
                s.id,
                s.train_time,
                entry.summary.skipped.as_deref().unwrap_or("untrainable")
            ),
        }
        index.splits.push(entry);
    }
    if index.splits.iter().all(|e| e.model.is_none()) {
        bail!("no split could be trained");
    }
    let mut bytes = serde_json::to_vec_pretty(&index)?;
    bytes.push(b'\n');
    std::fs::write(dir.join("index.json"), &bytes)?;
    run.output(&dir)?;
    let p = run.path("json");
    run.write(&p, &bytes)?;
    done(run)
}

fn load_index(dir: &Path) -> Result<TrainIndex> {
    let p = dir.join("index.json");
    let text = std::fs::read_to_string(&p)
        .with_context(|| format!("reading {} (expected the output directory of `train`)", p.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))
}

fn load_trained(dir: &Path, entry: &TrainEntry, run: &mut Run) -> Result<Option<TrainedSplit>> {
    let (Some(m), Some(f)) = (&entry.model, &entry.featurizer) else {
        return Ok(None);
    };
    let (mp, fp) = (dir.join(m), dir.join(f));
    run.input(&mp)?;
    run.input(&fp)?;
    let model = ModelFile::load(&mp)?;
    let text = std::fs::read_to_string(&fp).with_context(|| format!("reading {}", fp.display()))?;
    let featurizer: Featurizer = serde_json::from_str(&text).with_context(|| format!("parsing {}", fp.display()))?;
    if model.feature_fingerprint != featurizer.index.fingerprint() {
        bail!("{} was not trained on the features of {}", mp.display(), fp.display());
    }
    Ok(Some(TrainedSplit { featurizer, model }))
}

fn model_dir(cfg: &RunConfig) -> Result<&PathBuf> {
    cfg.model_dir
        .as_ref()
        .ok_or_else(|| anyhow!("no model directory; pass --models <train output dir>"))
}

// ------------------------------------------------------------ score

pub fn score(cfg: &RunConfig, cve: &str, date: NaiveDate, mut run: Run) -> Result<()> {
    let dir = model_dir(cfg)?.clone();
    let index = load_index(&dir)?;
    let entry = index
        .splits
        .iter()
        .filter(|e| e.model.is_some() && e.summary.train_time <= date)
        .max_by_key(|e| e.summary.train_time)
        .ok_or_else(|| anyhow!("no model trained on or before {date}"))?;
    let trained = load_trained(&dir, entry, &mut run)?.expect("entry has a model");
    let (store, _) = load_store(cfg, &mut run)?;
    if store.vuln(cve).is_none() {
        bail!("{cve} is not in the corpus");
    }
    let lid = load_langid(cfg, &mut run)?;
    let mut analysis = CorpusAnalysis::default();
    analysis.vulns.insert(
        cve.to_string(),
        analyze_vuln(&store, cve, &lid, &cfg.experiment.featurize),
    );
    let row = trained.featurizer.row(&analysis, &store, cve, date)?;
    let s = trained.model.score(cve, date, &row)?;
    let line = serde_json::to_string(&s)?;
    println!("{line}");
    let p = run.path("json");
    run.write(&p, format!("{line}\n").as_bytes())?;
    done(run)
}

// ------------------------------------------------------------ evaluate

#[derive(Debug, Serialize, Deserialize)]
pub struct EvaluateOutput {
    pub splits: Vec<SplitSummary>,
    /// Keyed by scoring offset (days after disclosure).
    pub reports: BTreeMap<i64, EvalReport>,
}

pub fn evaluate(cfg: &RunConfig, mut run: Run) -> Result<()> {
    let (store, analysis) = analyze(cfg, &mut run)?;
    let e = &cfg.experiment;
    let result = match &cfg.model_dir {
        None => run_experiment(&store, &analysis, e)?,
        Some(dir) => {
            let index = load_index(dir)?;
            let splits = build_splits(&store, e.window_start, e.window_end, &e.split)?;
            let (mut summaries, mut models, mut scores) = (Vec::new(), Vec::new(), Vec::new());
            for entry in &index.splits {
                let split = splits
                    .iter()
                    .find(|s| s.id == entry.summary.split_id && s.train_time == entry.summary.train_time)
                    .ok_or_else(|| {
                        anyhow!(
                            "split {} of {} does not match this configuration",
                            entry.summary.split_id,
                            dir.display()
                        )
                    })?;
                if let Some(t) = load_trained(dir, entry, &mut run)? {
                    scores.extend(score_split(&store, &analysis, split, &t, e)?);
                    models.push(t.model);
                }
                summaries.push(entry.summary.clone());
            }
            assemble_result(&store, summaries, models, scores, &e.score_offsets)?
        }
    };
    for (off, r) in &result.reports {
        eprintln!(
            "d+{off}: n={} positives={} ROC-AUC {:.4} PR-AUC {:.4}",
            r.n, r.positives, r.roc_auc, r.pr_auc
        );
    }
    let mut lines = String::new();
    for s in &result.scores {
        lines.push_str(&serde_json::to_string(s)?);
        lines.push('\n');
    }
    let p = run.path("scores.jsonl");
    run.write(&p, lines.as_bytes())?;
    for (off, r) in &result.reports {
        let p = run.path(&format!("pr.d{off}.csv"));
        run.write(&p, r.pr_csv().as_bytes())?;
        let p = run.path(&format!("roc.d{off}.csv"));
        run.write(&p, r.roc_csv().as_bytes())?;
    }
    let out = EvaluateOutput {
        splits: result.splits,
        reports: result.reports,
    };
    let p = run.path("json");
    run.write_json(&p, &out)?;
    done(run)
}

// ------------------------------------------------------------ noise-sim

#[derive(Serialize)]
struct NoiseArm {
    arm: String,
    loss: String,
    noisy: bool,
    /// Per offset: (ROC-AUC, PR-AUC, precision at recall 0.8).
    metrics: BTreeMap<i64, ArmMetrics>,
    splits: Vec<SplitSummary>,
}

#[derive(Serialize)]
struct ArmMetrics {
    roc_auc: f64,
    pr_auc: f64,
    precision_at_recall_0_8: Option<f64>,
}

/// `cwe:CWE-89` -> `cwe:89`, `cpe:Linux_Kernel` -> `cpe:linux_kernel`.
fn feature_name(f: &str) -> String {
    match f.split_once(':') {
        Some((ns, v)) if ns.eq_ignore_ascii_case(NS_CWE) => format!("{NS_CWE}:{}", normalize_cwe(v)),
        Some((ns, v)) if ns.eq_ignore_ascii_case(NS_CPE) => format!("{NS_CPE}:{}", normalize_product(v)),
        _ => f.to_string(),
    }
}

pub fn noise_sim(cfg: &RunConfig, feature: &str, losses: &[String], mut run: Run) -> Result<()> {
    let feature = feature_name(feature);
    let (store, analysis) = analyze(cfg, &mut run)?;
    let mut arms = vec![("pristine".to_string(), LossSpec::Bce, false)];
    for name in losses {
        let loss = match name.as_str() {
            "bce" => LossSpec::Bce,
            "lr" => LossSpec::Lr {
                lambda: match &cfg.experiment.loss {
                    LossSpec::Lr { lambda, .. } => *lambda,
                    _ => 1.0,
                },
                prior: 0.0,
            },
            // priors are filled in per split from the injected noise
            "fc" => LossSpec::Fc { prior: 0.0 },
            "ffc" => LossSpec::Ffc {
                feature_priors: BTreeMap::new(),
            },
            other => bail!("unknown loss {other:?}"),
        };
        arms.push((format!("{name}-noisy"), loss, true));
    }
    let mut out = Vec::new();
    let mut csv = String::from("arm,offset_days,roc_auc,pr_auc,precision_at_recall_0.8\n");
    for (arm, loss, noisy) in arms {
        let ecfg = ExperimentConfig {
            loss: loss.clone(),
            noise: noisy.then(|| NoiseSetup {
                feature: feature.clone(),
            }),
            ..cfg.experiment.clone()
        };
        let r = run_experiment(&store, &analysis, &ecfg)?;
        let mut metrics = BTreeMap::new();
        for (off, rep) in &r.reports {
            let p8 = precision_at_recall(&rep.pr_points, 0.8);
            csv.push_str(&format!(
                "{arm},{off},{},{},{}\n",
                rep.roc_auc,
                rep.pr_auc,
                p8.map(|p| p.to_string()).unwrap_or_default()
            ));
            metrics.insert(
                *off,
                ArmMetrics {
                    roc_auc: rep.roc_auc,
                    pr_auc: rep.pr_auc,
                    precision_at_recall_0_8: p8,
                },
            );
        }
        let first = metrics.values().next().map(|m| m.roc_auc).unwrap_or(f64::NAN);
        eprintln!(
            "{arm}: ROC-AUC {first:.4} at d+{}",
            metrics.keys().next().copied().unwrap_or(0)
        );
        out.push(NoiseArm {
            arm,
            loss: loss.name().to_string(),
            noisy,
            metrics,
            splits: r.splits,
        });
    }
    let p = run.path("csv");
    run.write(&p, csv.as_bytes())?;
    let p = run.path("json");
    run.write_json(&p, &out)?;
    done(run)
}

// ------------------------------------------------------------ chi2

pub fn chi2(cfg: &RunConfig, mut run: Run) -> Result<()> {
    let (store, _) = load_store(cfg, &mut run)?;
    let c = &cfg.chi2;
    let sources = if c.sources.is_empty() {
        store.sources()
    } else {
        c.sources.clone()
    };
    let features = if c.features.is_empty() {
        let voc = build_structured_vocab(store.vulns(), c.min_count, usize::MAX);
        let mut f: Vec<String> = voc.cwes.iter().map(|w| format!("{NS_CWE}:{w}")).collect();
        f.extend(
            voc.products
                .iter()
                .filter(|p| {
                    store
                        .vulns()
                        .filter(|v| v.products.iter().any(|q| q.to_lowercase() == **p))
                        .count()
                        >= c.min_count
                })
                .map(|p| format!("{NS_CPE}:{p}")),
        );
        f
    } else {
        c.features.clone()
    };
    if sources.is_empty() || features.is_empty() {
        bail!(
            "nothing to test: {} sources, {} features",
            sources.len(),
            features.len()
        );
    }
    let pairs: Vec<(String, String)> = sources
        .iter()
        .flat_map(|s| features.iter().map(move |f| (s.clone(), f.clone())))
        .collect();
    let results = chi2_batch(&store, &pairs, c.alpha, c.yates)?;
    let mut csv = String::from("source,feature,n00,n01,n10,n11,statistic,p_value,reject\n");
    let mut rejected = 0;
    for r in &results {
        let t = r.table;
        let (stat, p, rej) = match r.outcome {
            Chi2Outcome::Tested {
                statistic,
                p_value,
                reject,
            } => (statistic.to_string(), p_value.to_string(), reject.to_string()),
            Chi2Outcome::Untestable => (String::new(), String::new(), "untestable".into()),
        };
        rejected += usize::from(matches!(r.outcome, Chi2Outcome::Tested { reject: true, .. }));
        csv.push_str(&format!(
            "{},{},{},{},{},{},{stat},{p},{rej}\n",
            r.source, r.feature, t[0][0], t[0][1], t[1][0], t[1][1]
        ));
    }
    eprintln!("{} pairs tested, independence rejected for {rejected}", results.len());
    let p = run.path("csv");
    run.write(&p, csv.as_bytes())?;
    let p = run.path("json");
    run.write_json(&p, &results)?;
    done(run)
}

// ------------------------------------------------------------ report

pub fn report(input: &Path, mut run: Run) -> Result<()> {
    run.input(input)?;
    let text = std::fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
    let ev: EvaluateOutput =
        serde_json::from_str(&text).with_context(|| format!("{} is not an `evaluate` output", input.display()))?;
    let mut md = String::from("# Evaluation summary\n\n## Splits\n\n| split | training time | train | positives | test | model |\n|---|---|---|---|---|---|\n");
    for s in &ev.splits {
        md.push_str(&format!(
            "| {} | {} | {} | {} | {} | {} |\n",
            s.split_id,
            s.train_time,
            s.n_train,
            s.n_train_positive,
            s.n_test,
            s.model_id.as_deref().or(s.skipped.as_deref()).unwrap_or("-")
        ));
    }
    md.push_str("\n## Scores by offset after disclosure\n\n| offset (days) | n | exploited | ROC-AUC | PR-AUC | P at R=0.8 |\n|---|---|---|---|---|---|\n");
    let mut tv = String::from("offset_days,horizon_days,auc\n");
    let mut prio = String::from("offset_days,window_days,class,n,mean,std,median\n");
    for (off, r) in &ev.reports {
        let p8 = precision_at_recall(&r.pr_points, 0.8)
            .map(|p| format!("{p:.4}"))
            .unwrap_or_else(|| "-".into());
        md.push_str(&format!(
            "| {off} | {} | {} | {:.4} | {:.4} | {p8} |\n",
            r.n, r.positives, r.roc_auc, r.pr_auc
        ));
        for a in &r.time_varying_auc {
            tv.push_str(&format!("{off},{},{}\n", a.horizon_days, a.auc));
        }
        for p in &r.prioritization {
            for (class, s) in [("exploited", &p.exploited), ("not_exploited", &p.not_exploited)] {
                if let Some(s) = s {
                    prio.push_str(&format!(
                        "{off},{},{class},{},{},{},{}\n",
                        p.window_days, s.n, s.mean, s.std, s.median
                    ));
                }
            }
        }
    }
    let p = run.path("md");
    run.write(&p, md.as_bytes())?;
    let p = run.path("tvauc.csv");
    run.write(&p, tv.as_bytes())?;
    let p = run.path("prio.csv");
    run.write(&p, prio.as_bytes())?;
    print!("{md}");
    done(run)
}
