//! Synthetic corpora with known ground truth: vulnerabilities, dated
//! artifacts and exploit evidence with planted label signal, plus labeled
//! file sets for language identification.

mod code;
mod words;

pub use code::{extension, program, with_header};
pub use words::{background_words, IDENTS};

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{
    add_days, ArtifactKind, ArtifactRecord, CorpusStore, CvssComponents, EvidenceKind, ExploitEvidence, VulnRecord,
};
use crate::langid::LanguageLabel;
use words::pick_words;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Writeup,
    PocComment,
    PocCode,
}

/// A token planted with class-dependent probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalToken {
    pub token: String,
    pub channel: Channel,
    pub p_exploited: f64,
    pub p_not_exploited: f64,
}

/// A CWE tag carried by a share of each class. With `suppress_evidence`,
/// tagged exploited vulnerabilities get no exploit evidence, so their
/// observed label is 0 while the trace keeps the true label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisyFeature {
    pub cwe: String,
    pub p_exploited: f64,
    pub p_not_exploited: f64,
    pub suppress_evidence: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_vulns: usize,
    pub exploit_base_rate: f64,
    pub seed: u64,
    pub start: NaiveDate,
    pub span_days: i64,
    pub signals: Vec<SignalToken>,
    pub poc_rate_exploited: f64,
    pub poc_rate_not_exploited: f64,
    /// Mean number of extra nested control blocks in exploited PoCs.
    pub complexity_effect: f64,
    pub writeup_words: usize,
    pub second_writeup_rate: f64,
    pub noisy_feature: Option<NoisyFeature>,
    pub exploit_delay_mean_days: f64,
    pub poc_delay_mean_days: f64,
    pub cvss_delay_mean_days: f64,
    pub poc_languages: Vec<LanguageLabel>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_vulns: 2000,
            exploit_base_rate: 0.3,
            seed: 0,
            start: NaiveDate::from_ymd_opt(2015, 1, 1).expect("valid date"),
            span_days: 5 * 365,
            signals: vec![
                SignalToken {
                    token: "exploitable".into(),
                    channel: Channel::Writeup,
                    p_exploited: 0.9,
                    p_not_exploited: 0.05,
                },
                SignalToken {
                    token: "weaponized".into(),
                    channel: Channel::PocComment,
                    p_exploited: 0.6,
                    p_not_exploited: 0.05,
                },
                SignalToken {
                    token: "retaddr".into(),
                    channel: Channel::PocCode,
                    p_exploited: 0.5,
                    p_not_exploited: 0.1,
                },
            ],
            poc_rate_exploited: 0.8,
            poc_rate_not_exploited: 0.3,
            complexity_effect: 2.0,
            writeup_words: 40,
            second_writeup_rate: 0.3,
            noisy_feature: None,
            exploit_delay_mean_days: 60.0,
            poc_delay_mean_days: 4.0,
            cvss_delay_mean_days: 20.0,
            poc_languages: vec![
                LanguageLabel::Python,
                LanguageLabel::C,
                LanguageLabel::Php,
                LanguageLabel::JavaScript,
                LanguageLabel::Java,
                LanguageLabel::Ruby,
                LanguageLabel::Text,
            ],
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("invalid synthetic config: {0}")]
    Invalid(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl SynthConfig {
    /// A config with every class-dependent rate equalized: no label signal.
    pub fn without_signal(mut self) -> Self {
        for s in &mut self.signals {
            s.p_not_exploited = s.p_exploited;
        }
        self.poc_rate_not_exploited = self.poc_rate_exploited;
        self.complexity_effect = 0.0;
        self
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Invalid(m));
        if self.n_vulns < 10 {
            return bad(format!("n_vulns must be at least 10, got {}", self.n_vulns));
        }
        let mut probs = vec![
            ("exploit_base_rate", self.exploit_base_rate),
            ("poc_rate_exploited", self.poc_rate_exploited),
            ("poc_rate_not_exploited", self.poc_rate_not_exploited),
            ("second_writeup_rate", self.second_writeup_rate),
        ];
        for s in &self.signals {
            probs.push(("signal p_exploited", s.p_exploited));
            probs.push(("signal p_not_exploited", s.p_not_exploited));
        }
        if let Some(n) = &self.noisy_feature {
            probs.push(("noisy p_exploited", n.p_exploited));
            probs.push(("noisy p_not_exploited", n.p_not_exploited));
        }
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} is not a probability"));
            }
        }
        if self.span_days < 1 || self.poc_languages.is_empty() {
            return bad("span_days must be positive and poc_languages non-empty".into());
        }
        if self.complexity_effect < 0.0
            || self.exploit_delay_mean_days < 0.0
            || self.poc_delay_mean_days < 0.0
            || self.cvss_delay_mean_days < 0.0
        {
            return bad("effect sizes and delay means must be non-negative".into());
        }
        Ok(())
    }
}

/// Ground truth behind a generated corpus.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GeneratorTrace {
    pub seed: u64,
    pub true_labels: BTreeMap<String, u8>,
    pub disclosure: BTreeMap<String, NaiveDate>,
    /// Days from disclosure to the first exploit, for exploited vulnerabilities.
    pub exploit_delay: BTreeMap<String, i64>,
    /// Days from disclosure to the first PoC.
    pub poc_delay: BTreeMap<String, i64>,
    /// Planted signal tokens per vulnerability.
    pub planted: BTreeMap<String, Vec<String>>,
    /// Extra nesting levels given to each PoC-carrying vulnerability.
    pub extra_nesting: BTreeMap<String, usize>,
    pub noisy_tagged: BTreeSet<String>,
    pub suppressed: BTreeSet<String>,
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub store: CorpusStore,
    pub trace: GeneratorTrace,
}

impl SynthOutput {
    /// Writes `vulns.jsonl`, `artifacts.jsonl`, `evidence.jsonl` and `trace.json`.
    pub fn write(&self, dir: &Path) -> Result<(), SynthError> {
        let io = |source| SynthError::Io {
            path: dir.to_path_buf(),
            source,
        };
        self.store.write_jsonl(dir).map_err(io)?;
        let path = dir.join("trace.json");
        std::fs::write(&path, serde_json::to_vec_pretty(&self.trace).expect("serializable"))
            .map_err(|source| SynthError::Io { path, source })
    }
}

const CWES: &[&str] = &[
    "CWE-79", "CWE-20", "CWE-119", "CWE-200", "CWE-264", "CWE-22", "CWE-352", "CWE-416", "CWE-787", "CWE-190",
];
const PRODUCTS: &[&str] = &[
    "linux_kernel",
    "windows_10",
    "chrome",
    "firefox",
    "wordpress",
    "android",
    "openssl",
    "php",
    "java_se",
    "iphone_os",
    "mac_os_x",
    "acrobat_reader",
    "flash_player",
    "drupal",
    "joomla",
    "mysql",
    "tomcat",
    "struts",
    "jenkins",
    "nginx",
];

fn exp_days(rng: &mut ChaCha8Rng, mean: f64) -> i64 {
    if mean <= 0.0 {
        return 0;
    }
    let u: f64 = rng.gen_range(f64::EPSILON..1.0);
    (-u.ln() * mean).floor() as i64
}

fn cvss3(rng: &mut ChaCha8Rng, exploited: bool) -> CvssComponents {
    let pick = |rng: &mut ChaCha8Rng, vals: &[&str]| Some(vals.choose(rng).expect("values").to_string());
    let av = if exploited && rng.gen_bool(0.5) {
        Some("N".to_string())
    } else {
        pick(rng, &["N", "A", "L", "P"])
    };
    CvssComponents {
        av,
        ac: pick(rng, &["L", "H"]),
        pr: pick(rng, &["N", "L", "H"]),
        ui: pick(rng, &["N", "R"]),
        s: pick(rng, &["U", "C"]),
        c: pick(rng, &["N", "L", "H"]),
        i: pick(rng, &["N", "L", "H"]),
        a: pick(rng, &["N", "L", "H"]),
        ..CvssComponents::default()
    }
}

/// Generates a corpus. Deterministic per `cfg.seed`.
pub fn generate(cfg: &SynthConfig) -> Result<SynthOutput, SynthError> {
    cfg.validate()?;
    if cfg.exploit_base_rate == 0.0 || cfg.exploit_base_rate == 1.0 {
        log::warn!(
            "exploit_base_rate {} yields a single-class corpus",
            cfg.exploit_base_rate
        );
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let words: Vec<&str> = background_words().iter().map(String::as_str).collect();
    let mut store = CorpusStore::new();
    let mut trace = GeneratorTrace {
        seed: cfg.seed,
        ..GeneratorTrace::default()
    };
    let width = (cfg.n_vulns as f64).log10().floor() as usize + 1;
    for n in 0..cfg.n_vulns {
        let id = format!("SYN-{n:0width$}");
        let exploited = rng.gen_bool(cfg.exploit_base_rate);
        let delta = add_days(cfg.start, rng.gen_range(0..cfg.span_days));
        let p_of = |pe: f64, pn: f64| if exploited { pe } else { pn };
        let mut planted: BTreeMap<Channel, Vec<String>> = BTreeMap::new();
        for s in &cfg.signals {
            if rng.gen_bool(p_of(s.p_exploited, s.p_not_exploited)) {
                planted.entry(s.channel).or_default().push(s.token.clone());
            }
        }

        let mut v = VulnRecord::new(&id);
        v.description = pick_words(&mut rng, &words, 15).join(" ");
        v.nvd_published = Some(add_days(delta, rng.gen_range(0..4)));
        v.cwe_ids = vec![CWES.choose(&mut rng).expect("cwes").to_string()];
        let tagged = cfg
            .noisy_feature
            .as_ref()
            .map(|nf| rng.gen_bool(p_of(nf.p_exploited, nf.p_not_exploited)))
            .unwrap_or(false);
        if tagged {
            v.cwe_ids = vec![cfg.noisy_feature.as_ref().expect("noisy").cwe.clone()];
            trace.noisy_tagged.insert(id.clone());
        }
        let np = rng.gen_range(1..3);
        let mut products: Vec<String> = (0..np)
            .map(|_| {
                let u: f64 = rng.gen();
                PRODUCTS[((u * u) * PRODUCTS.len() as f64) as usize].to_string()
            })
            .collect();
        products.sort();
        products.dedup();
        v.products = products;
        v.cvss_v3 = Some(cvss3(&mut rng, exploited));
        v.cvss_published = Some(add_days(delta, exp_days(&mut rng, cfg.cvss_delay_mean_days) + 1));
        store.add_vuln(v);

        let mut writeup = pick_words(&mut rng, &words, cfg.writeup_words);
        for t in planted.get(&Channel::Writeup).into_iter().flatten() {
            let at = rng.gen_range(0..=writeup.len());
            writeup.insert(at, t);
        }
        let add = |store: &mut CorpusStore, kind, date, source: &str, content: String, ext: Option<&str>| {
            store
                .add_artifact(ArtifactRecord {
                    vuln_id: id.clone(),
                    kind,
                    date,
                    source: source.to_string(),
                    content: content.into_bytes(),
                    declared_extension: ext.map(String::from),
                })
                .expect("vuln exists");
        };
        add(
            &mut store,
            ArtifactKind::Writeup,
            delta,
            "advisory",
            writeup.join(" "),
            None,
        );
        if rng.gen_bool(cfg.second_writeup_rate) {
            let later = add_days(delta, rng.gen_range(1..30));
            add(
                &mut store,
                ArtifactKind::Writeup,
                later,
                "blog",
                pick_words(&mut rng, &words, cfg.writeup_words).join(" "),
                None,
            );
        }

        if rng.gen_bool(p_of(cfg.poc_rate_exploited, cfg.poc_rate_not_exploited)) {
            let lang = *cfg.poc_languages.choose(&mut rng).expect("languages");
            let extra = if exploited && cfg.complexity_effect > 0.0 {
                let base = cfg.complexity_effect.floor() as usize;
                base + usize::from(rng.gen_bool(cfg.complexity_effect.fract()))
            } else {
                0
            };
            let len = rng.gen_range(4..10);
            let nest = extra + rng.gen_range(0..2);
            let mut code = program(&mut rng, lang, len, nest, &words);
            if let Some(toks) = planted.get(&Channel::PocCode) {
                if !lang.is_prose() {
                    for t in toks {
                        code = code.replacen("port", t, 1);
                    }
                } else {
                    code.push_str(&toks.join(" "));
                }
            }
            let mut header = pick_words(&mut rng, &words, 10);
            for t in planted.get(&Channel::PocComment).into_iter().flatten() {
                header.push(t);
            }
            let content = with_header(lang, &header.join(" "), &code);
            let pd = exp_days(&mut rng, cfg.poc_delay_mean_days);
            let ext = if rng.gen_bool(0.7) { extension(lang) } else { None };
            add(
                &mut store,
                ArtifactKind::Poc,
                add_days(delta, pd),
                "exploitdb",
                content,
                ext,
            );
            trace.poc_delay.insert(id.clone(), pd);
            trace.extra_nesting.insert(id.clone(), extra);
        }

        if exploited {
            let ed = exp_days(&mut rng, cfg.exploit_delay_mean_days).min(364);
            trace.exploit_delay.insert(id.clone(), ed);
            let suppress = tagged && cfg.noisy_feature.as_ref().map(|n| n.suppress_evidence).unwrap_or(false);
            if suppress {
                trace.suppressed.insert(id.clone());
            } else {
                let (source, kind) = if rng.gen_bool(0.7) {
                    ("exploitdb", EvidenceKind::Functional)
                } else {
                    ("wild", EvidenceKind::InTheWild)
                };
                store
                    .add_evidence(ExploitEvidence {
                        vuln_id: id.clone(),
                        source: source.into(),
                        kind,
                        date: Some(add_days(delta, ed)),
                    })
                    .expect("vuln exists");
            }
        }
        trace.true_labels.insert(id.clone(), u8::from(exploited));
        trace.disclosure.insert(id.clone(), delta);
        trace
            .planted
            .insert(id.clone(), planted.into_values().flatten().collect());
    }
    Ok(SynthOutput { store, trace })
}

/// Classes produced by [`generate_langid_corpus`].
pub const LANGID_CLASSES: &[LanguageLabel] = &[
    LanguageLabel::Text,
    LanguageLabel::Python,
    LanguageLabel::C,
    LanguageLabel::Cpp,
    LanguageLabel::Java,
    LanguageLabel::JavaScript,
    LanguageLabel::Php,
    LanguageLabel::Ruby,
    LanguageLabel::Perl,
    LanguageLabel::Shell,
];

/// One labeled file for language identification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledFile {
    pub content: String,
    pub extension: Option<String>,
    pub label: LanguageLabel,
}

/// `n` labeled files cycling through [`LANGID_CLASSES`]; half carry their
/// extension. Deterministic per seed.
pub fn generate_langid_corpus(n: usize, seed: u64) -> Vec<LabeledFile> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let words: Vec<&str> = background_words().iter().map(String::as_str).collect();
    (0..n)
        .map(|i| {
            let label = LANGID_CLASSES[i % LANGID_CLASSES.len()];
            let len = rng.gen_range(3..12);
            let nest = rng.gen_range(0..3);
            let body = program(&mut rng, label, len, nest, &words);
            let hlen = rng.gen_range(3..12);
            let header = pick_words(&mut rng, &words, hlen).join(" ");
            let content = if rng.gen_bool(0.5) {
                with_header(label, &header, &body)
            } else {
                body
            };
            let extension = if rng.gen_bool(0.5) {
                extension(label).map(String::from)
            } else {
                None
            };
            LabeledFile {
                content,
                extension,
                label,
            }
        })
        .collect()
}
