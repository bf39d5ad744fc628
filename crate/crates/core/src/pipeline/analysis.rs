use std::collections::BTreeMap;
use std::time::Duration;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::astfeat::{self, Budget, CodeFeatureSet};
use crate::corpus::{ArtifactKind, CorpusStore};
use crate::langid::{self, IdentifyConfig, LanguageLabel, TokenModel};
use crate::textfeat::{self, CountMode, DEFAULT_CODE_MIN_COUNT, DEFAULT_TEXT_MIN_COUNT};
use crate::vulnfeat::{DEFAULT_CWE_MIN_COUNT, DEFAULT_TOP_PRODUCTS};

/// Featurization thresholds and analysis settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeaturizeConfig {
    pub text_min_count: usize,
    pub code_min_count: usize,
    pub count_mode: CountMode,
    pub cwe_min_count: usize,
    pub top_products: usize,
    pub identify: IdentifyConfig,
    pub parse_budget_ms: u64,
    pub parse_max_depth: usize,
    /// Worker threads for artifact analysis; 0 means all available cores.
    pub threads: usize,
}

impl Default for FeaturizeConfig {
    fn default() -> Self {
        let b = Budget::default();
        Self {
            text_min_count: DEFAULT_TEXT_MIN_COUNT,
            code_min_count: DEFAULT_CODE_MIN_COUNT,
            count_mode: CountMode::Documents,
            cwe_min_count: DEFAULT_CWE_MIN_COUNT,
            top_products: DEFAULT_TOP_PRODUCTS,
            identify: IdentifyConfig::default(),
            parse_budget_ms: b.time.as_millis() as u64,
            parse_max_depth: b.max_depth,
            threads: 0,
        }
    }
}

impl FeaturizeConfig {
    pub fn budget(&self) -> Budget {
        Budget {
            time: Duration::from_millis(self.parse_budget_ms),
            max_depth: self.parse_max_depth,
        }
    }
}

/// Date-independent analysis of one artifact.
#[derive(Debug, Clone, PartialEq)]
pub enum ArtifactAnalysis {
    Prose {
        kind: ArtifactKind,
        date: NaiveDate,
        tokens: Vec<String>,
    },
    Poc {
        date: NaiveDate,
        source: String,
        language: LanguageLabel,
        info_tokens: Vec<String>,
        code_tokens: Vec<String>,
        code: CodeFeatureSet,
    },
}

impl ArtifactAnalysis {
    pub fn date(&self) -> NaiveDate {
        match self {
            ArtifactAnalysis::Prose { date, .. } | ArtifactAnalysis::Poc { date, .. } => *date,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VulnAnalysis {
    pub vuln_id: String,
    pub disclosure: Option<NaiveDate>,
    /// Tokens of the NVD description carried on the record itself.
    pub description_tokens: Vec<String>,
    /// Sorted by (date, source).
    pub artifacts: Vec<ArtifactAnalysis>,
}

/// Language identification, comment separation, tokenization and parsing of
/// every artifact in a store, done once and reused for every snapshot date.
#[derive(Debug, Clone, Default)]
pub struct CorpusAnalysis {
    pub vulns: BTreeMap<String, VulnAnalysis>,
}

/// Analysis of a single vulnerability's artifacts.
pub fn analyze_vuln(store: &CorpusStore, id: &str, model: &TokenModel, cfg: &FeaturizeConfig) -> VulnAnalysis {
    let budget = cfg.budget();
    let mut arts: Vec<_> = store.artifacts(id).iter().collect();
    arts.sort_by(|a, b| (a.date, &a.source).cmp(&(b.date, &b.source)));
    let artifacts = arts
        .into_iter()
        .map(|a| match a.kind {
            ArtifactKind::Writeup | ArtifactKind::NvdDescription => ArtifactAnalysis::Prose {
                kind: a.kind,
                date: a.date,
                tokens: textfeat::tokenize(&a.text()),
            },
            ArtifactKind::Poc => {
                let (language, conf) =
                    langid::identify(&a.content, a.declared_extension.as_deref(), model, &cfg.identify);
                let sep = langid::separate(&a.text(), language, conf);
                let parsed = astfeat::parse_with_budget(&sep.code, language, &budget);
                if parsed.timed_out {
                    log::warn!("{id}: PoC from {} hit the parse budget", a.source);
                }
                ArtifactAnalysis::Poc {
                    date: a.date,
                    source: a.source.clone(),
                    language,
                    info_tokens: textfeat::tokenize(&sep.comments),
                    code_tokens: textfeat::code_tokens(&sep),
                    code: astfeat::extract_code_features(&parsed),
                }
            }
        })
        .collect();
    VulnAnalysis {
        vuln_id: id.to_string(),
        disclosure: store.estimate_disclosure(id).ok(),
        description_tokens: store
            .vuln(id)
            .map(|v| textfeat::tokenize(&v.description))
            .unwrap_or_default(),
        artifacts,
    }
}

/// Analyzes every vulnerability in `store`, in parallel. The result does not
/// depend on the thread count.
pub fn analyze_corpus(store: &CorpusStore, model: &TokenModel, cfg: &FeaturizeConfig) -> CorpusAnalysis {
    let ids: Vec<&str> = store.vuln_ids().collect();
    let threads = match cfg.threads {
        0 => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
        n => n,
    }
    .min(ids.len().max(1));
    let chunk = ids.len().div_ceil(threads).max(1);
    let parts: Vec<Vec<VulnAnalysis>> = std::thread::scope(|s| {
        let handles: Vec<_> = ids
            .chunks(chunk)
            .map(|part| s.spawn(move || part.iter().map(|id| analyze_vuln(store, id, model, cfg)).collect()))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("analysis worker panicked"))
            .collect()
    });
    CorpusAnalysis {
        vulns: parts.into_iter().flatten().map(|v| (v.vuln_id.clone(), v)).collect(),
    }
}
