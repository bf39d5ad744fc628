//! Error-tolerant parsing of exploit code and extraction of structural
//! complexity features.
//!
//! Each supported language has an adapter that lexes, parses statement by
//! statement and maps its constructs onto one shared node taxonomy, so the
//! feature names are stable across languages. A statement that fails to parse
//! is skipped up to the next boundary and counted in `error_count`.

mod ast;
mod clike;
mod features;
mod lexer;
mod parser;
mod python;

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::langid::LanguageLabel;

pub use ast::{AstNode, LiteralType, CONTROL_KINDS};
pub use clike::Dialect;
pub use features::{
    aggregate_poc_code_features, cyclomatic, extract_code_features, CodeBlock, CodeFeatureSet, PocCode, Stats, NS_CODE,
};

/// Per-file parsing limits. Parsing stops cooperatively once either is hit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub time: Duration,
    /// Maximum syntactic nesting; deeper constructs are treated as errors.
    pub max_depth: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Self {
            time: Duration::from_millis(1000),
            max_depth: 96,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParseResult {
    pub language: LanguageLabel,
    /// False when no adapter exists for `language`.
    pub supported: bool,
    pub root: AstNode,
    pub error_count: u64,
    /// Lines where statement recovery happened (first 64).
    pub error_lines: Vec<u32>,
    pub parsed_fraction: f64,
    pub statements: u64,
    pub statements_parsed: u64,
    /// Set when the time budget ran out; `root` then holds a partial tree.
    pub timed_out: bool,
    pub sloc: u64,
    pub loc: u64,
    pub char_count: u64,
    pub keyword_counts: BTreeMap<String, u64>,
}

/// A parser for one language family.
///
/// To add a language, implement this trait, map its constructs onto the
/// kinds used by [`AstNode`] (control statements must use the names in
/// [`CONTROL_KINDS`]) and register it in [`adapter_for`].
pub trait LanguageAdapter {
    fn language(&self) -> LanguageLabel;
    /// Returns the top-level statements plus statement bookkeeping.
    fn parse(&self, code: &str, budget: &Budget) -> AdapterOutput;
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdapterOutput {
    pub statements: Vec<AstNode>,
    pub attempted: u64,
    pub parsed: u64,
    pub errors: u64,
    pub error_lines: Vec<u32>,
    pub timed_out: bool,
}

pub fn adapter_for(lang: LanguageLabel) -> Option<Box<dyn LanguageAdapter>> {
    match lang {
        LanguageLabel::Python => Some(Box::new(python::PythonAdapter)),
        LanguageLabel::C => Some(Box::new(clike::CLikeAdapter::new(Dialect::C))),
        LanguageLabel::Cpp => Some(Box::new(clike::CLikeAdapter::new(Dialect::Cpp))),
        LanguageLabel::Java => Some(Box::new(clike::CLikeAdapter::new(Dialect::Java))),
        LanguageLabel::JavaScript => Some(Box::new(clike::CLikeAdapter::new(Dialect::JavaScript))),
        LanguageLabel::Php => Some(Box::new(clike::CLikeAdapter::new(Dialect::Php))),
        _ => None,
    }
}

pub fn supported_languages() -> Vec<LanguageLabel> {
    LanguageLabel::ALL
        .iter()
        .copied()
        .filter(|l| adapter_for(*l).is_some())
        .collect()
}

/// Reserved words for `lang`, if a list ships with the crate.
pub fn keywords(lang: LanguageLabel) -> &'static [&'static str] {
    use std::sync::OnceLock;
    static LISTS: OnceLock<BTreeMap<LanguageLabel, Vec<&'static str>>> = OnceLock::new();
    let lists = LISTS.get_or_init(|| {
        let raw: [(LanguageLabel, &'static str); 11] = [
            (LanguageLabel::Python, include_str!("../../data/keywords/python.txt")),
            (LanguageLabel::C, include_str!("../../data/keywords/c.txt")),
            (LanguageLabel::Cpp, include_str!("../../data/keywords/cpp.txt")),
            (LanguageLabel::Java, include_str!("../../data/keywords/java.txt")),
            (
                LanguageLabel::JavaScript,
                include_str!("../../data/keywords/javascript.txt"),
            ),
            (LanguageLabel::Php, include_str!("../../data/keywords/php.txt")),
            (LanguageLabel::Ruby, include_str!("../../data/keywords/ruby.txt")),
            (LanguageLabel::Perl, include_str!("../../data/keywords/perl.txt")),
            (LanguageLabel::Shell, include_str!("../../data/keywords/shell.txt")),
            (
                LanguageLabel::VisualBasic,
                include_str!("../../data/keywords/visualbasic.txt"),
            ),
            (LanguageLabel::Html, include_str!("../../data/keywords/html.txt")),
        ];
        raw.into_iter()
            .map(|(l, s)| {
                let mut words: Vec<&'static str> = s
                    .lines()
                    .filter(|l| !l.trim_start().starts_with('#'))
                    .flat_map(str::split_whitespace)
                    .collect();
                words.sort_unstable();
                words.dedup();
                (l, words)
            })
            .collect()
    });
    lists.get(&lang).map(Vec::as_slice).unwrap_or(&[])
}

fn count_keywords(code: &str, lang: LanguageLabel) -> BTreeMap<String, u64> {
    let kws = keywords(lang);
    let mut out = BTreeMap::new();
    if kws.is_empty() {
        return out;
    }
    let case_insensitive = lang == LanguageLabel::VisualBasic;
    for word in code.split(|c: char| !(c.is_alphanumeric() || c == '_')) {
        if word.is_empty() {
            continue;
        }
        let hit = if case_insensitive {
            kws.iter().find(|k| k.eq_ignore_ascii_case(word)).copied()
        } else {
            kws.binary_search(&word).ok().map(|i| kws[i])
        };
        if let Some(k) = hit {
            *out.entry(k.to_string()).or_insert(0) += 1;
        }
    }
    out
}

pub fn line_counts(code: &str) -> (u64, u64) {
    let loc = code.lines().count() as u64;
    let sloc = code.lines().filter(|l| !l.trim().is_empty()).count() as u64;
    (loc, sloc)
}

pub fn parse_robust(code: &str, lang: LanguageLabel) -> ParseResult {
    parse_with_budget(code, lang, &Budget::default())
}

pub fn parse_with_budget(code: &str, lang: LanguageLabel, budget: &Budget) -> ParseResult {
    let (loc, sloc) = line_counts(code);
    let base = ParseResult {
        language: lang,
        supported: false,
        root: AstNode::root(Vec::new()),
        error_count: 0,
        error_lines: Vec::new(),
        parsed_fraction: 0.0,
        statements: 0,
        statements_parsed: 0,
        timed_out: false,
        sloc,
        loc,
        char_count: code.chars().count() as u64,
        keyword_counts: count_keywords(code, lang),
    };
    let Some(adapter) = adapter_for(lang) else {
        return base;
    };
    let out = adapter.parse(code, budget);
    let parsed_fraction = if out.attempted == 0 {
        if out.errors == 0 {
            1.0
        } else {
            0.0
        }
    } else {
        out.parsed as f64 / out.attempted as f64
    };
    ParseResult {
        supported: true,
        root: AstNode::root(out.statements),
        error_count: out.errors,
        error_lines: out.error_lines,
        parsed_fraction,
        statements: out.attempted,
        statements_parsed: out.parsed,
        timed_out: out.timed_out,
        ..base
    }
}

pub(crate) fn deadline(budget: &Budget) -> Instant {
    Instant::now() + budget.time
}
