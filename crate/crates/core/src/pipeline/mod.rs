//! Corpus to design matrices: artifact analysis, per-split vocabularies and
//! scaling, feature indexing and temporal train/test splits.

mod analysis;
mod features;
mod matrix;
mod splits;

pub use analysis::{analyze_corpus, analyze_vuln, ArtifactAnalysis, CorpusAnalysis, FeaturizeConfig, VulnAnalysis};
pub use features::{
    build_vocabs, featurize, featurize_raw, training_documents, FeatureIndex, Featurizer, Scaler, Vocabs, NS_POCLANG,
};
pub use matrix::{DesignMatrix, MatrixMeta, RowId, MATRIX_FORMAT_VERSION};
pub use splits::{build_splits, prepare_split, PreparedSplit, SplitConfig, TemporalSplit, DEFAULT_SCORE_OFFSETS};

use std::path::PathBuf;

use crate::corpus::CorpusError;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("unknown vulnerability {0}")]
    UnknownVuln(String),
    #[error("vulnerability {0} was not analyzed")]
    NotAnalyzed(String),
    #[error("window start {start} is not before end {end}")]
    InvalidWindow {
        start: chrono::NaiveDate,
        end: chrono::NaiveDate,
    },
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed matrix file {path}: {message}")]
    Malformed { path: PathBuf, message: String },
}
