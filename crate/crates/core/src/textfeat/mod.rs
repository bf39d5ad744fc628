//! Binary unigram features for natural-language artifacts and PoC code tokens.
//!
//! Namespaces: `writeup:` (write-ups), `nvd:` (NVD descriptions), `pocinfo:`
//! (PoC prose and code comments) and `poctok:` (identifiers, keywords and
//! literals from PoC code).

mod vocab;

pub use vocab::{build_vocab, CountMode, Vocabulary, VOCAB_FORMAT_VERSION};

use std::collections::HashSet;
use std::sync::OnceLock;

use crate::langid::SeparatedPoC;
use crate::SparseVector;

pub const NS_WRITEUP: &str = "writeup";
pub const NS_NVD: &str = "nvd";
pub const NS_POCINFO: &str = "pocinfo";
pub const NS_POCTOK: &str = "poctok";

/// Default document-frequency threshold for prose namespaces.
pub const DEFAULT_TEXT_MIN_COUNT: usize = 100;
/// Default document-frequency threshold for the code-token namespace.
pub const DEFAULT_CODE_MIN_COUNT: usize = 10;

fn stopwords() -> &'static HashSet<&'static str> {
    static WORDS: OnceLock<HashSet<&'static str>> = OnceLock::new();
    WORDS.get_or_init(|| {
        include_str!("../../data/stopwords_en.txt")
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .collect()
    })
}

/// Lowercases, splits on non-alphanumerics, drops English stopwords and
/// single-character numbers.
pub fn tokenize(text: &str) -> Vec<String> {
    let sw = stopwords();
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .filter(|t| !sw.contains(t.as_str()))
        .filter(|t| !(t.len() < 2 && t.chars().all(|c| c.is_ascii_digit())))
        .collect()
}

/// Identifier, keyword and literal tokens from code, lowercased. No stopword
/// filtering. String literals contribute their alphanumeric words.
pub fn code_tokens(separated: &SeparatedPoC) -> Vec<String> {
    lex_code_tokens(&separated.code)
}

pub(crate) fn lex_code_tokens(code: &str) -> Vec<String> {
    let chars: Vec<char> = code.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(chars[start..i].iter().collect::<String>().to_lowercase());
        } else if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '.') {
                i += 1;
            }
            let lit: String = chars[start..i].iter().collect();
            out.push(lit.trim_end_matches('.').to_lowercase());
        } else if c == '"' || c == '\'' || c == '`' {
            let quote = c;
            i += 1;
            let start = i;
            while i < chars.len() && chars[i] != quote && chars[i] != '\n' {
                if chars[i] == '\\' {
                    i += 1;
                }
                i += 1;
            }
            let end = i.min(chars.len());
            let body: String = chars[start..end].iter().collect();
            out.extend(
                body.split(|c: char| !c.is_alphanumeric() && c != '_')
                    .filter(|w| !w.is_empty())
                    .map(str::to_lowercase),
            );
            i += 1;
        } else {
            i += 1;
        }
    }
    out
}

/// Binary presence vector over `vocab` for the union of all token lists.
/// Out-of-vocabulary tokens are ignored.
pub fn vectorize<'a, I, T>(docs: I, vocab: &Vocabulary) -> SparseVector
where
    I: IntoIterator<Item = T>,
    T: IntoIterator<Item = &'a String>,
{
    let mut v = SparseVector::new();
    for doc in docs {
        for tok in doc {
            if vocab.contains(tok) {
                v.set(vocab.feature_id(tok));
            }
        }
    }
    v
}
