use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::sha256_hex;

pub const VOCAB_FORMAT_VERSION: u32 = 1;

/// How the pruning threshold counts a token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountMode {
    /// Number of documents containing the token.
    #[default]
    Documents,
    /// Total number of occurrences.
    Occurrences,
}

/// Frozen token → dense index map for one namespace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub version: u32,
    pub namespace: String,
    pub min_count: usize,
    pub count_mode: CountMode,
    /// Hash of the training documents the vocabulary was built from.
    pub built_from: String,
    index: BTreeMap<String, usize>,
}

impl Vocabulary {
    pub fn empty(namespace: &str) -> Self {
        build_vocab::<Vec<String>>(&[], namespace, 1, CountMode::Documents)
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.index.keys().map(String::as_str)
    }

    pub fn feature_id(&self, token: &str) -> String {
        format!("{}:{}", self.namespace, token)
    }
}

/// Keeps tokens whose count across `docs` reaches `min_count`. Indices are
/// assigned in sorted token order, so the result does not depend on document
/// order.
pub fn build_vocab<D: AsRef<[String]>>(docs: &[D], namespace: &str, min_count: usize, mode: CountMode) -> Vocabulary {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    let mut fingerprint = Vec::new();
    for doc in docs {
        let doc = doc.as_ref();
        match mode {
            CountMode::Documents => {
                let uniq: HashSet<&str> = doc.iter().map(String::as_str).collect();
                for t in uniq {
                    *counts.entry(t).or_default() += 1;
                }
            }
            CountMode::Occurrences => {
                for t in doc {
                    *counts.entry(t.as_str()).or_default() += 1;
                }
            }
        }
        fingerprint.extend_from_slice(doc.join(" ").as_bytes());
        fingerprint.push(b'\n');
    }
    let index = counts
        .into_iter()
        .filter(|&(_, c)| c >= min_count)
        .enumerate()
        .map(|(i, (t, _))| (t.to_string(), i))
        .collect();
    Vocabulary {
        version: VOCAB_FORMAT_VERSION,
        namespace: namespace.to_string(),
        min_count,
        count_mode: mode,
        built_from: sha256_hex(&fingerprint),
        index,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn docs_with(token: &str, n: usize) -> Vec<Vec<String>> {
        (0..n).map(|i| vec![token.to_string(), format!("u{i}")]).collect()
    }

    #[test]
    fn threshold_boundary() {
        let v = build_vocab(&docs_with("shellcode", 9), "poctok", 10, CountMode::Documents);
        assert!(!v.contains("shellcode"));
        let v = build_vocab(&docs_with("shellcode", 10), "poctok", 10, CountMode::Documents);
        assert!(v.contains("shellcode"));
        assert_eq!(v.len(), 1);
        assert_eq!(v.index_of("shellcode"), Some(0));
    }

    #[test]
    fn empty_corpus_gives_empty_vocab() {
        let v = build_vocab::<Vec<String>>(&[], "writeup", 100, CountMode::Documents);
        assert!(v.is_empty());
    }

    #[test]
    fn document_vs_occurrence_counting() {
        let docs = vec![vec!["a".to_string(); 5]];
        assert!(!build_vocab(&docs, "nvd", 2, CountMode::Documents).contains("a"));
        assert!(build_vocab(&docs, "nvd", 2, CountMode::Occurrences).contains("a"));
    }

    #[test]
    fn indices_are_dense_and_sorted() {
        let docs = vec![vec!["c".to_string(), "a".to_string(), "b".to_string()]];
        let v = build_vocab(&docs, "nvd", 1, CountMode::Documents);
        let idx: Vec<_> = v.tokens().map(|t| v.index_of(t).unwrap()).collect();
        assert_eq!(idx, vec![0, 1, 2]);
        assert_eq!(v.tokens().collect::<Vec<_>>(), vec!["a", "b", "c"]);
        let json = serde_json::to_string(&v).unwrap();
        assert_eq!(serde_json::from_str::<Vocabulary>(&json).unwrap(), v);
    }
}
