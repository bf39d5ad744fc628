use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::tokenize::{code_like_count, lang_tokens};
use super::{LangIdError, LanguageLabel};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Multinomial naive-Bayes model over [`lang_tokens`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenModel {
    pub version: u32,
    pub alpha: f64,
    pub classes: Vec<LanguageLabel>,
    pub vocab: BTreeMap<String, usize>,
    /// Training documents per class.
    pub class_docs: Vec<u64>,
    /// Token counts, `token_counts[class][token]`.
    pub token_counts: Vec<Vec<u64>>,
    pub log_priors: Vec<f64>,
    /// `log_probs[class][token]`, smoothed so each class row sums to 1 in
    /// probability space.
    pub log_probs: Vec<Vec<f64>>,
}

/// Heuristic thresholds for [`identify`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentifyConfig {
    /// Minimum posterior of the extension's class for the extension to win.
    pub ext_threshold: f64,
    /// Files with fewer code-like tokens are classified as prose.
    pub min_code_tokens: usize,
}

impl Default for IdentifyConfig {
    fn default() -> Self {
        Self {
            ext_threshold: 0.05,
            min_code_tokens: 10,
        }
    }
}

pub const DEFAULT_ALPHA: f64 = 0.01;

/// Trains the token model. Class priors are document frequencies.
pub fn train_language_model<S: AsRef<[u8]>>(
    files: &[(S, LanguageLabel)],
    alpha: f64,
) -> Result<TokenModel, LangIdError> {
    if files.is_empty() {
        return Err(LangIdError::EmptyTrainingSet);
    }
    assert!(alpha > 0.0, "smoothing constant must be positive");
    let mut per_class: BTreeMap<LanguageLabel, (u64, BTreeMap<String, u64>)> = BTreeMap::new();
    for (content, label) in files {
        let text = String::from_utf8_lossy(content.as_ref());
        let entry = per_class.entry(*label).or_default();
        entry.0 += 1;
        for t in lang_tokens(&text) {
            *entry.1.entry(t).or_default() += 1;
        }
    }
    let mut vocab: BTreeMap<String, usize> = per_class
        .values()
        .flat_map(|(_, c)| c.keys().cloned())
        .map(|t| (t, 0))
        .collect();
    for (i, v) in vocab.values_mut().enumerate() {
        *v = i;
    }
    let classes: Vec<LanguageLabel> = per_class.keys().copied().collect();
    let total_docs: u64 = per_class.values().map(|(n, _)| n).sum();
    let v = vocab.len();
    let mut class_docs = Vec::new();
    let mut token_counts = Vec::new();
    let mut log_priors = Vec::new();
    let mut log_probs = Vec::new();
    for (n_docs, counts) in per_class.values() {
        let mut row = vec![0u64; v];
        for (t, c) in counts {
            row[vocab[t]] = *c;
        }
        let total: u64 = row.iter().sum();
        let denom = total as f64 + alpha * v as f64;
        log_probs.push(row.iter().map(|&c| ((c as f64 + alpha) / denom).ln()).collect());
        log_priors.push((*n_docs as f64 / total_docs as f64).ln());
        class_docs.push(*n_docs);
        token_counts.push(row);
    }
    Ok(TokenModel {
        version: MODEL_FORMAT_VERSION,
        alpha,
        classes,
        vocab,
        class_docs,
        token_counts,
        log_priors,
        log_probs,
    })
}

impl TokenModel {
    /// Posterior over classes for `tokens`; out-of-vocabulary tokens are ignored.
    /// Returns `None` if no token is in the vocabulary.
    pub fn posterior(&self, tokens: &[String]) -> Option<Vec<f64>> {
        let ids: Vec<usize> = tokens.iter().filter_map(|t| self.vocab.get(t).copied()).collect();
        if ids.is_empty() {
            return None;
        }
        let scores: Vec<f64> = (0..self.classes.len())
            .map(|c| self.log_priors[c] + ids.iter().map(|&i| self.log_probs[c][i]).sum::<f64>())
            .collect();
        let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exp: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
        let z: f64 = exp.iter().sum();
        Some(exp.into_iter().map(|e| e / z).collect())
    }

    pub fn class_index(&self, label: LanguageLabel) -> Option<usize> {
        self.classes.iter().position(|&c| c == label)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serialises")
    }

    pub fn from_json(s: &str) -> Result<Self, LangIdError> {
        let m: TokenModel = serde_json::from_str(s).map_err(|e| LangIdError::Malformed(e.to_string()))?;
        if m.version != MODEL_FORMAT_VERSION {
            return Err(LangIdError::Version(m.version));
        }
        let v = m.vocab.len();
        let k = m.classes.len();
        if m.log_priors.len() != k || m.log_probs.len() != k || m.log_probs.iter().any(|r| r.len() != v) {
            return Err(LangIdError::Malformed("inconsistent dimensions".into()));
        }
        Ok(m)
    }
}

/// Identifies the language of a file. Total over arbitrary bytes.
pub fn identify(
    content: &[u8],
    declared_extension: Option<&str>,
    model: &TokenModel,
    cfg: &IdentifyConfig,
) -> (LanguageLabel, f64) {
    let text = String::from_utf8_lossy(content);
    if text.trim().is_empty() {
        return (LanguageLabel::Text, 1.0);
    }
    let tokens = lang_tokens(&text);
    let knows_text = model.class_index(LanguageLabel::Text).is_some();
    if knows_text && code_like_count(&tokens) < cfg.min_code_tokens {
        return (LanguageLabel::Text, 1.0);
    }
    let Some(post) = model.posterior(&tokens) else {
        // no token evidence at all: unknown grammar
        if model.classes.len() == 1 {
            return (model.classes[0], 1.0);
        }
        return (LanguageLabel::None, 1.0);
    };
    if let Some(ext_label) = declared_extension.and_then(LanguageLabel::from_extension) {
        if let Some(ci) = model.class_index(ext_label) {
            if post[ci] >= cfg.ext_threshold {
                return (ext_label, post[ci]);
            }
        }
    }
    let (best, p) = post.iter().enumerate().fold(
        (0, f64::NEG_INFINITY),
        |acc, (i, &p)| if p > acc.1 { (i, p) } else { acc },
    );
    (model.classes[best], p.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two_class() -> TokenModel {
        train_language_model(
            &[
                ("int main(){}", LanguageLabel::C),
                ("def f(): pass", LanguageLabel::Python),
            ],
            DEFAULT_ALPHA,
        )
        .unwrap()
    }

    #[test]
    fn empty_training_set_is_an_error() {
        let empty: Vec<(&str, LanguageLabel)> = vec![];
        assert!(matches!(
            train_language_model(&empty, 0.01),
            Err(LangIdError::EmptyTrainingSet)
        ));
    }

    #[test]
    fn two_class_separable_fixture() {
        let m = two_class();
        let (l, p) = identify(b"def g(): pass", None, &m, &IdentifyConfig::default());
        assert_eq!(l, LanguageLabel::Python);
        assert!((0.0..=1.0).contains(&p));
    }

    #[test]
    fn single_class_model_always_predicts_it() {
        let m = train_language_model(&[("puts 'hi'", LanguageLabel::Ruby)], DEFAULT_ALPHA).unwrap();
        for input in ["puts 'x'", "int main(){return 0;}", "#include <stdio.h>\nputs"] {
            let (l, _) = identify(input.as_bytes(), Some(".c"), &m, &IdentifyConfig::default());
            assert_eq!(l, LanguageLabel::Ruby, "{input}");
        }
    }

    #[test]
    fn duplicated_files_scale_counts_and_keep_priors() {
        let base = vec![
            ("int main(){}", LanguageLabel::C),
            ("def f(): pass", LanguageLabel::Python),
            ("def h(x): return x", LanguageLabel::Python),
        ];
        let doubled: Vec<_> = base.iter().chain(base.iter()).cloned().collect();
        let a = train_language_model(&base, DEFAULT_ALPHA).unwrap();
        let b = train_language_model(&doubled, DEFAULT_ALPHA).unwrap();
        assert_eq!(a.vocab, b.vocab);
        assert_eq!(a.log_priors, b.log_priors);
        for (ra, rb) in a.token_counts.iter().zip(&b.token_counts) {
            assert!(ra.iter().zip(rb).all(|(x, y)| 2 * x == *y));
        }
        for (ra, rb) in a.class_docs.iter().zip(&b.class_docs) {
            assert_eq!(2 * ra, *rb);
        }
    }

    #[test]
    fn class_distributions_sum_to_one() {
        let m = two_class();
        for row in &m.log_probs {
            let s: f64 = row.iter().map(|l| l.exp()).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_content_is_text() {
        let m = two_class();
        assert_eq!(
            identify(b"", None, &m, &IdentifyConfig::default()),
            (LanguageLabel::Text, 1.0)
        );
        assert_eq!(
            identify(b"  \n", Some(".c"), &m, &IdentifyConfig::default()).0,
            LanguageLabel::Text
        );
    }

    fn prose_c_model() -> TokenModel {
        train_language_model(
            &[
                (
                    "#include <stdio.h>\nint main(void) { char buf[8]; return 0; }",
                    LanguageLabel::C,
                ),
                (
                    "#include <string.h>\nvoid f(char *s) { char b[4]; strcpy(b, s); }",
                    LanguageLabel::C,
                ),
                (
                    "The attacker sends a crafted request to the server which then crashes.",
                    LanguageLabel::Text,
                ),
                (
                    "This vulnerability allows remote attackers to execute code via a long name.",
                    LanguageLabel::Text,
                ),
                ("import os\ndef run(cmd):\n    os.system(cmd)\n", LanguageLabel::Python),
            ],
            DEFAULT_ALPHA,
        )
        .unwrap()
    }

    #[test]
    fn prose_without_extension_is_text() {
        let m = prose_c_model();
        let (l, _) = identify(
            b"A remote attacker could crash the service by sending an overly long user name.",
            None,
            &m,
            &IdentifyConfig::default(),
        );
        assert_eq!(l, LanguageLabel::Text);
    }

    #[test]
    fn consistent_extension_and_tokens() {
        let m = prose_c_model();
        let (l, p) = identify(
            b"#include <stdio.h>\nint main(){return 0;}",
            Some(".c"),
            &m,
            &IdentifyConfig::default(),
        );
        assert_eq!(l, LanguageLabel::C);
        assert!(p >= 0.05);
    }

    #[test]
    fn contradicted_extension_loses() {
        let m = prose_c_model();
        let code = b"import os\ndef run(cmd):\n    os.system(cmd)\n    return [cmd, cmd] == {}\n";
        let (l, _) = identify(code, Some(".c"), &m, &IdentifyConfig::default());
        assert_eq!(l, LanguageLabel::Python);
    }

    #[test]
    fn json_round_trip_and_version_check() {
        let m = two_class();
        let back = TokenModel::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
        let bumped = m.to_json().replacen("\"version\":1", "\"version\":99", 1);
        assert!(matches!(TokenModel::from_json(&bumped), Err(LangIdError::Version(99))));
        assert!(TokenModel::from_json("{").is_err());
    }

    proptest! {
        #[test]
        fn identify_is_total(bytes in prop::collection::vec(any::<u8>(), 0..400), ext in prop::option::of("\\.[a-z]{1,4}")) {
            let m = prose_c_model();
            let (_, p) = identify(&bytes, ext.as_deref(), &m, &IdentifyConfig::default());
            prop_assert!((0.0..=1.0).contains(&p));
        }
    }
}
