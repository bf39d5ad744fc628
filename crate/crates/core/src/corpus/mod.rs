//! Vulnerability, artifact and exploit-evidence records, their JSON-Lines
//! ingestion, and lifecycle estimation (disclosure, exploit availability,
//! ground-truth labels, dated snapshots).

mod ingest;
mod lifecycle;
mod types;

pub use ingest::{IngestOptions, IngestReport, LineDiagnostic, Schema};
pub use lifecycle::{add_days, ExploitTiming, LabelConfig};
pub use types::{
    ArtifactKind, ArtifactRecord, CvssComponents, EvidenceKind, ExploitEvidence, LifecycleDates, VulnRecord,
};

use std::collections::BTreeMap;
use std::path::PathBuf;

use chrono::NaiveDate;
use thiserror::Error;

pub type Date = NaiveDate;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unknown vulnerability {0}")]
    UnknownVuln(String),
    #[error("undatable vulnerability {0}: no dated write-up and no NVD publication date")]
    Undatable(String),
}

/// The three record collections of a corpus, keyed by vulnerability id.
///
/// Built single-threaded by ingestion, then treated as read-only.
#[derive(Debug, Clone, Default)]
pub struct CorpusStore {
    vulns: BTreeMap<String, VulnRecord>,
    artifacts: BTreeMap<String, Vec<ArtifactRecord>>,
    evidence: BTreeMap<String, Vec<ExploitEvidence>>,
}

impl CorpusStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.vulns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vulns.is_empty()
    }

    pub fn vuln(&self, id: &str) -> Option<&VulnRecord> {
        self.vulns.get(id)
    }

    pub fn vulns(&self) -> impl Iterator<Item = &VulnRecord> {
        self.vulns.values()
    }

    pub fn vuln_ids(&self) -> impl Iterator<Item = &str> {
        self.vulns.keys().map(String::as_str)
    }

    pub fn artifacts(&self, id: &str) -> &[ArtifactRecord] {
        self.artifacts.get(id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn evidence(&self, id: &str) -> &[ExploitEvidence] {
        self.evidence.get(id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn artifact_count(&self) -> usize {
        self.artifacts.values().map(Vec::len).sum()
    }

    pub fn evidence_count(&self) -> usize {
        self.evidence.values().map(Vec::len).sum()
    }

    /// Inserts a vulnerability. Returns false (and leaves the store unchanged)
    /// if the id is empty or already present.
    pub fn add_vuln(&mut self, v: VulnRecord) -> bool {
        if v.id.is_empty() || self.vulns.contains_key(&v.id) {
            return false;
        }
        self.vulns.insert(v.id.clone(), v);
        true
    }

    /// Inserts an artifact; the referenced vulnerability must exist.
    pub fn add_artifact(&mut self, a: ArtifactRecord) -> Result<(), CorpusError> {
        if !self.vulns.contains_key(&a.vuln_id) {
            return Err(CorpusError::UnknownVuln(a.vuln_id));
        }
        self.artifacts.entry(a.vuln_id.clone()).or_default().push(a);
        Ok(())
    }

    /// Inserts exploit evidence; the referenced vulnerability must exist.
    pub fn add_evidence(&mut self, e: ExploitEvidence) -> Result<(), CorpusError> {
        if !self.vulns.contains_key(&e.vuln_id) {
            return Err(CorpusError::UnknownVuln(e.vuln_id));
        }
        self.evidence.entry(e.vuln_id.clone()).or_default().push(e);
        Ok(())
    }

    pub(crate) fn artifacts_mut(&mut self, id: &str) -> Option<&mut Vec<ArtifactRecord>> {
        self.artifacts.get_mut(id)
    }

    /// Distinct evidence source names, sorted.
    pub fn sources(&self) -> Vec<String> {
        let mut s: Vec<String> = self.evidence.values().flatten().map(|e| e.source.clone()).collect();
        s.sort();
        s.dedup();
        s
    }

    /// Writes the store back out as the three JSON-Lines files.
    pub fn write_jsonl(&self, dir: &std::path::Path) -> std::io::Result<()> {
        use std::io::Write;
        std::fs::create_dir_all(dir)?;
        let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("vulns.jsonl"))?);
        for v in self.vulns.values() {
            writeln!(f, "{}", serde_json::to_string(v).expect("vuln serialises"))?;
        }
        f.flush()?;
        let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("artifacts.jsonl"))?);
        for a in self.artifacts.values().flatten() {
            writeln!(f, "{}", serde_json::to_string(a).expect("artifact serialises"))?;
        }
        f.flush()?;
        let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("evidence.jsonl"))?);
        for e in self.evidence.values().flatten() {
            writeln!(f, "{}", serde_json::to_string(e).expect("evidence serialises"))?;
        }
        f.flush()
    }

    /// Loads `vulns.jsonl`, `artifacts.jsonl` and `evidence.jsonl` from `dir`
    /// (in that order, so references resolve).
    pub fn load_dir(dir: &std::path::Path, opts: &IngestOptions) -> Result<(Self, Vec<IngestReport>), CorpusError> {
        let mut store = CorpusStore::new();
        let mut reports = Vec::new();
        for (file, schema) in [
            ("vulns.jsonl", Schema::Vulns),
            ("artifacts.jsonl", Schema::Artifacts),
            ("evidence.jsonl", Schema::Evidence),
        ] {
            reports.push(store.ingest_jsonl(&dir.join(file), schema, opts)?);
        }
        Ok((store, reports))
    }
}
