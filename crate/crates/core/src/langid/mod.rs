//! Programming-language identification for PoC files and code/comment
//! separation.
//!
//! Identification combines a multinomial naive-Bayes token model with three
//! heuristics: empty input is prose, a file with too few code-like tokens is
//! prose, and an unambiguous file extension wins unless the token evidence
//! contradicts it.

mod model;
mod separate;
mod tokenize;

pub use model::{identify, train_language_model, IdentifyConfig, TokenModel, DEFAULT_ALPHA, MODEL_FORMAT_VERSION};
pub use separate::{separate, SeparatedPoC};
pub use tokenize::{code_like_count, lang_tokens};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LangIdError {
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("unsupported model format version {0}")]
    Version(u32),
    #[error("malformed model: {0}")]
    Malformed(String),
}

/// The closed set of PoC language classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LanguageLabel {
    Text,
    Ruby,
    C,
    Perl,
    Python,
    JavaScript,
    #[serde(rename = "PHP")]
    Php,
    #[serde(rename = "HTML")]
    Html,
    Shell,
    VisualBasic,
    None,
    #[serde(rename = "C++")]
    Cpp,
    Java,
}

impl LanguageLabel {
    pub const ALL: [LanguageLabel; 13] = [
        LanguageLabel::Text,
        LanguageLabel::Ruby,
        LanguageLabel::C,
        LanguageLabel::Perl,
        LanguageLabel::Python,
        LanguageLabel::JavaScript,
        LanguageLabel::Php,
        LanguageLabel::Html,
        LanguageLabel::Shell,
        LanguageLabel::VisualBasic,
        LanguageLabel::None,
        LanguageLabel::Cpp,
        LanguageLabel::Java,
    ];

    /// Lowercase slug used in feature names.
    pub fn slug(self) -> &'static str {
        match self {
            LanguageLabel::Text => "text",
            LanguageLabel::Ruby => "ruby",
            LanguageLabel::C => "c",
            LanguageLabel::Perl => "perl",
            LanguageLabel::Python => "python",
            LanguageLabel::JavaScript => "javascript",
            LanguageLabel::Php => "php",
            LanguageLabel::Html => "html",
            LanguageLabel::Shell => "shell",
            LanguageLabel::VisualBasic => "visualbasic",
            LanguageLabel::None => "none",
            LanguageLabel::Cpp => "cpp",
            LanguageLabel::Java => "java",
        }
    }

    pub fn from_slug(s: &str) -> Option<Self> {
        let s = s.to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .find(|l| l.slug() == s || (s == "c++" && *l == LanguageLabel::Cpp))
    }

    /// Language implied by a file extension, when the extension is unambiguous.
    pub fn from_extension(ext: &str) -> Option<Self> {
        let ext = ext.trim_start_matches('.').to_ascii_lowercase();
        Some(match ext.as_str() {
            "txt" | "md" => LanguageLabel::Text,
            "rb" => LanguageLabel::Ruby,
            "c" => LanguageLabel::C,
            "pl" | "pm" => LanguageLabel::Perl,
            "py" => LanguageLabel::Python,
            "js" => LanguageLabel::JavaScript,
            "php" => LanguageLabel::Php,
            "html" | "htm" => LanguageLabel::Html,
            "sh" | "bash" => LanguageLabel::Shell,
            "vb" | "vbs" => LanguageLabel::VisualBasic,
            "cpp" | "cc" | "cxx" | "hpp" => LanguageLabel::Cpp,
            "java" => LanguageLabel::Java,
            _ => return None,
        })
    }

    /// True for classes whose content is prose rather than code.
    pub fn is_prose(self) -> bool {
        matches!(self, LanguageLabel::Text | LanguageLabel::None)
    }
}

impl std::fmt::Display for LanguageLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.slug())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exactly_thirteen_classes_with_unique_slugs() {
        let mut slugs: Vec<_> = LanguageLabel::ALL.iter().map(|l| l.slug()).collect();
        slugs.sort();
        slugs.dedup();
        assert_eq!(slugs.len(), 13);
        for l in LanguageLabel::ALL {
            assert_eq!(LanguageLabel::from_slug(l.slug()), Some(l));
        }
    }

    #[test]
    fn ambiguous_extensions_map_to_nothing() {
        assert_eq!(LanguageLabel::from_extension(".h"), None);
        assert_eq!(LanguageLabel::from_extension("inc"), None);
        assert_eq!(LanguageLabel::from_extension(".PY"), Some(LanguageLabel::Python));
    }
}
