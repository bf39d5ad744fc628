use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::analysis::{ArtifactAnalysis, CorpusAnalysis, FeaturizeConfig, VulnAnalysis};
use super::PipelineError;
use crate::astfeat::{aggregate_poc_code_features, PocCode, NS_CODE};
use crate::corpus::{ArtifactKind, CorpusStore, VulnRecord};
use crate::langid::LanguageLabel;
use crate::textfeat::{self, build_vocab, Vocabulary, NS_NVD, NS_POCINFO, NS_POCTOK, NS_WRITEUP};
use crate::vulnfeat::{self, build_structured_vocab, StructuredVocab};
use crate::{sha256_hex, SparseVector};

pub const NS_POCLANG: &str = "poclang";

/// All vocabularies of one training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocabs {
    pub writeup: Vocabulary,
    pub nvd: Vocabulary,
    pub pocinfo: Vocabulary,
    pub poctok: Vocabulary,
    pub structured: StructuredVocab,
}

impl Vocabs {
    pub fn fingerprints(&self) -> BTreeMap<String, String> {
        let structured = serde_json::to_vec(&self.structured).expect("serializable");
        [
            (NS_WRITEUP, self.writeup.built_from.clone()),
            (NS_NVD, self.nvd.built_from.clone()),
            (NS_POCINFO, self.pocinfo.built_from.clone()),
            (NS_POCTOK, self.poctok.built_from.clone()),
            ("structured", sha256_hex(&structured)),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }

    /// Every feature id the vocabularies can produce.
    pub fn feature_ids(&self) -> BTreeSet<String> {
        let mut ids = BTreeSet::new();
        for v in [&self.writeup, &self.nvd, &self.pocinfo, &self.poctok] {
            ids.extend(v.tokens().map(|t| v.feature_id(t)));
        }
        ids.extend(vulnfeat::cvss_feature_ids());
        ids.extend(self.structured.cwes.iter().map(|c| format!("{}:{c}", vulnfeat::NS_CWE)));
        ids.extend(
            self.structured
                .products
                .iter()
                .map(|p| format!("{}:{p}", vulnfeat::NS_CPE)),
        );
        ids.extend(LanguageLabel::ALL.iter().map(|l| format!("{NS_POCLANG}:{}", l.slug())));
        ids
    }
}

/// Token documents visible at `z` for the given vulnerabilities, per
/// namespace: one document per artifact (the record description counts as one
/// NVD document once published).
pub fn training_documents<'a>(
    analysis: &'a CorpusAnalysis,
    store: &CorpusStore,
    ids: &[String],
    z: NaiveDate,
) -> BTreeMap<&'static str, Vec<&'a [String]>> {
    let mut docs: BTreeMap<&'static str, Vec<&'a [String]>> = [NS_WRITEUP, NS_NVD, NS_POCINFO, NS_POCTOK]
        .into_iter()
        .map(|n| (n, Vec::new()))
        .collect();
    for id in ids {
        let Some(va) = analysis.vulns.get(id) else { continue };
        if description_visible(store.vuln(id), z) && !va.description_tokens.is_empty() {
            docs.get_mut(NS_NVD).unwrap().push(&va.description_tokens);
        }
        for a in va.artifacts.iter().filter(|a| a.date() <= z) {
            match a {
                ArtifactAnalysis::Prose { kind, tokens, .. } => {
                    let ns = if *kind == ArtifactKind::Writeup {
                        NS_WRITEUP
                    } else {
                        NS_NVD
                    };
                    docs.get_mut(ns).unwrap().push(tokens);
                }
                ArtifactAnalysis::Poc {
                    info_tokens,
                    code_tokens,
                    ..
                } => {
                    docs.get_mut(NS_POCINFO).unwrap().push(info_tokens);
                    docs.get_mut(NS_POCTOK).unwrap().push(code_tokens);
                }
            }
        }
    }
    docs
}

fn description_visible(v: Option<&VulnRecord>, z: NaiveDate) -> bool {
    v.map(|v| v.nvd_published.map(|d| d <= z).unwrap_or(true))
        .unwrap_or(false)
}

/// Vocabularies built from the training vulnerabilities' artifacts visible at `z`.
pub fn build_vocabs(
    analysis: &CorpusAnalysis,
    store: &CorpusStore,
    train_ids: &[String],
    z: NaiveDate,
    cfg: &FeaturizeConfig,
) -> Vocabs {
    let docs = training_documents(analysis, store, train_ids, z);
    let vocab = |ns: &str, min: usize| build_vocab(&docs[ns], ns, min, cfg.count_mode);
    let records: Vec<VulnRecord> = train_ids
        .iter()
        .filter_map(|id| store.vuln(id))
        .filter(|v| v.nvd_published.map(|d| d <= z).unwrap_or(true))
        .cloned()
        .collect();
    Vocabs {
        writeup: vocab(NS_WRITEUP, cfg.text_min_count),
        nvd: vocab(NS_NVD, cfg.text_min_count),
        pocinfo: vocab(NS_POCINFO, cfg.text_min_count),
        poctok: vocab(NS_POCTOK, cfg.code_min_count),
        structured: build_structured_vocab(&records, cfg.cwe_min_count, cfg.top_products),
    }
}

/// Unscaled feature vector of a vulnerability as observed at `z`.
pub fn featurize_raw(va: &VulnAnalysis, record: &VulnRecord, z: NaiveDate, vocabs: &Vocabs) -> SparseVector {
    let mut out = vulnfeat::encode_structured(record, &vocabs.structured, z);
    let mut writeups: Vec<&[String]> = Vec::new();
    let mut nvd: Vec<&[String]> = Vec::new();
    let mut info: Vec<&[String]> = Vec::new();
    let mut toks: Vec<&[String]> = Vec::new();
    let mut pocs = Vec::new();
    if description_visible(Some(record), z) {
        nvd.push(&va.description_tokens);
    }
    for a in va.artifacts.iter().filter(|a| a.date() <= z) {
        match a {
            ArtifactAnalysis::Prose { kind, tokens, .. } => {
                if *kind == ArtifactKind::Writeup {
                    writeups.push(tokens)
                } else {
                    nvd.push(tokens)
                }
            }
            ArtifactAnalysis::Poc {
                date,
                source,
                language,
                info_tokens,
                code_tokens,
                code,
            } => {
                info.push(info_tokens);
                toks.push(code_tokens);
                out.set(format!("{NS_POCLANG}:{}", language.slug()));
                pocs.push(PocCode {
                    date: *date,
                    source: source.clone(),
                    features: code.clone(),
                });
            }
        }
    }
    out.extend(textfeat::vectorize(writeups, &vocabs.writeup));
    out.extend(textfeat::vectorize(nvd, &vocabs.nvd));
    out.extend(textfeat::vectorize(info, &vocabs.pocinfo));
    out.extend(textfeat::vectorize(toks, &vocabs.poctok));
    out.extend(aggregate_poc_code_features(&pocs).to_sparse());
    out
}

/// Min-max scaling of the numeric code features, fit on training vectors.
/// Absent entries count as 0. Features never seen in training are dropped.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub ranges: BTreeMap<String, (f64, f64)>,
}

impl Scaler {
    pub fn fit<'a>(vectors: impl IntoIterator<Item = &'a SparseVector>) -> Self {
        let mut ranges: BTreeMap<String, (f64, f64)> = BTreeMap::new();
        for v in vectors {
            for (id, x) in v.namespace(NS_CODE) {
                let r = ranges.entry(id.to_string()).or_insert((0.0, 0.0));
                r.0 = r.0.min(x);
                r.1 = r.1.max(x);
            }
        }
        Self { ranges }
    }

    pub fn apply(&self, v: &SparseVector) -> SparseVector {
        v.iter()
            .filter_map(|(id, x)| {
                if !id.starts_with("code:") {
                    return Some((id.to_string(), x));
                }
                let (lo, hi) = *self.ranges.get(id)?;
                let y = if hi > lo {
                    ((x - lo) / (hi - lo)).clamp(0.0, 1.0)
                } else {
                    f64::from(u8::from(x > lo))
                };
                Some((id.to_string(), y))
            })
            .collect()
    }
}

/// Frozen feature-id → column map shared by all rows of a split.
/// Serialized as the sorted id list.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct FeatureIndex {
    ids: Vec<String>,
    map: BTreeMap<String, usize>,
}

impl From<Vec<String>> for FeatureIndex {
    fn from(ids: Vec<String>) -> Self {
        Self::new(ids)
    }
}

impl From<FeatureIndex> for Vec<String> {
    fn from(index: FeatureIndex) -> Self {
        index.ids
    }
}

impl FeatureIndex {
    pub fn new(ids: impl IntoIterator<Item = String>) -> Self {
        let set: BTreeSet<String> = ids.into_iter().collect();
        let ids: Vec<String> = set.into_iter().collect();
        let map = ids.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        Self { ids, map }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<usize> {
        self.map.get(id).copied()
    }

    pub fn id(&self, i: usize) -> &str {
        &self.ids[i]
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn fingerprint(&self) -> String {
        sha256_hex(self.ids.join("\n").as_bytes())
    }

    /// Index-based row; ids outside the index are dropped.
    pub fn encode(&self, v: &SparseVector) -> Vec<(usize, f64)> {
        let mut row: Vec<(usize, f64)> = v.iter().filter_map(|(id, x)| self.get(id).map(|i| (i, x))).collect();
        row.sort_by_key(|(i, _)| *i);
        row
    }

    pub fn decode(&self, row: &[(usize, f64)]) -> SparseVector {
        row.iter().map(|(i, x)| (self.ids[*i].clone(), *x)).collect()
    }
}

/// Everything needed to turn a (vulnerability, date) pair into a model row
/// for one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Featurizer {
    pub vocabs: Vocabs,
    pub scaler: Scaler,
    pub index: FeatureIndex,
}

impl Featurizer {
    /// Scaled vector restricted to the index.
    pub fn featurize(
        &self,
        analysis: &CorpusAnalysis,
        store: &CorpusStore,
        vuln_id: &str,
        z: NaiveDate,
    ) -> Result<SparseVector, PipelineError> {
        let raw = featurize(analysis, store, vuln_id, z, &self.vocabs)?;
        let scaled = self.scaler.apply(&raw);
        Ok(scaled
            .iter()
            .filter(|(id, _)| self.index.get(id).is_some())
            .map(|(k, v)| (k.to_string(), v))
            .collect())
    }

    pub fn row(
        &self,
        analysis: &CorpusAnalysis,
        store: &CorpusStore,
        vuln_id: &str,
        z: NaiveDate,
    ) -> Result<Vec<(usize, f64)>, PipelineError> {
        let raw = featurize(analysis, store, vuln_id, z, &self.vocabs)?;
        Ok(self.index.encode(&self.scaler.apply(&raw)))
    }
}

/// Unscaled feature vector of `vuln_id` over its snapshot at `z`.
pub fn featurize(
    analysis: &CorpusAnalysis,
    store: &CorpusStore,
    vuln_id: &str,
    z: NaiveDate,
    vocabs: &Vocabs,
) -> Result<SparseVector, PipelineError> {
    let record = store
        .vuln(vuln_id)
        .ok_or_else(|| PipelineError::UnknownVuln(vuln_id.to_string()))?;
    store.estimate_disclosure(vuln_id)?;
    let va = analysis
        .vulns
        .get(vuln_id)
        .ok_or_else(|| PipelineError::NotAnalyzed(vuln_id.to_string()))?;
    Ok(featurize_raw(va, record, z, vocabs))
}
