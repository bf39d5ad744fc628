use std::collections::{HashMap, HashSet};
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ArtifactRecord, CorpusError, CorpusStore, ExploitEvidence, VulnRecord};
use crate::sha256_hex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schema {
    Vulns,
    Artifacts,
    Evidence,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestOptions {
    /// Drop duplicate records. Artifacts are compared by a hash of their
    /// whitespace-normalised content per vulnerability (the earliest-dated
    /// copy is kept); vulns and evidence by exact equality.
    pub dedupe: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineDiagnostic {
    /// 1-based line number.
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub path: String,
    pub added: usize,
    pub skipped: usize,
    pub duplicates: usize,
    pub diagnostics: Vec<LineDiagnostic>,
}

/// Hash of `content` with every whitespace run collapsed to one space and
/// leading/trailing whitespace removed.
pub fn normalized_content_hash(content: &[u8]) -> String {
    let text = String::from_utf8_lossy(content);
    let norm = text.split_whitespace().collect::<Vec<_>>().join(" ");
    sha256_hex(norm.as_bytes())
}

impl CorpusStore {
    /// Reads one JSON-Lines file of the declared schema into the store.
    ///
    /// An unreadable file is fatal; malformed lines are skipped and reported.
    pub fn ingest_jsonl(
        &mut self,
        path: &Path,
        schema: Schema,
        opts: &IngestOptions,
    ) -> Result<IngestReport, CorpusError> {
        let io_err = |source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        };
        let file = std::fs::File::open(path).map_err(io_err)?;
        let mut report = self
            .ingest_reader(std::io::BufReader::new(file), schema, opts)
            .map_err(io_err)?;
        report.path = path.display().to_string();
        Ok(report)
    }

    pub fn ingest_reader<R: BufRead>(
        &mut self,
        reader: R,
        schema: Schema,
        opts: &IngestOptions,
    ) -> std::io::Result<IngestReport> {
        let mut report = IngestReport::default();
        let mut seen_artifacts: HashMap<(String, String), usize> = HashMap::new();
        let mut seen_evidence: HashSet<String> = HashSet::new();
        if opts.dedupe {
            for id in self.vulns.keys() {
                for (k, a) in self.artifacts(id).iter().enumerate() {
                    seen_artifacts.insert((id.clone(), normalized_content_hash(&a.content)), k);
                }
                for e in self.evidence(id) {
                    seen_evidence.insert(serde_json::to_string(e).unwrap_or_default());
                }
            }
        }

        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = n + 1;
            if line.trim().is_empty() {
                continue;
            }
            let mut skip = |msg: String| {
                report.skipped += 1;
                report.diagnostics.push(LineDiagnostic {
                    line: lineno,
                    message: msg,
                });
            };
            match schema {
                Schema::Vulns => match serde_json::from_str::<VulnRecord>(&line) {
                    Ok(v) if v.id.is_empty() => skip("empty id".into()),
                    Ok(v) => {
                        if let Some(existing) = self.vulns.get(&v.id) {
                            if opts.dedupe && *existing == v {
                                report.duplicates += 1;
                            } else {
                                skip(format!("duplicate id {}", v.id));
                            }
                        } else {
                            self.add_vuln(v);
                            report.added += 1;
                        }
                    }
                    Err(e) => skip(e.to_string()),
                },
                Schema::Artifacts => match serde_json::from_str::<ArtifactRecord>(&line) {
                    Ok(a) if !self.vulns.contains_key(&a.vuln_id) => {
                        skip(format!("unknown vulnerability {}", a.vuln_id))
                    }
                    Ok(a) => {
                        if opts.dedupe {
                            let key = (a.vuln_id.clone(), normalized_content_hash(&a.content));
                            if let Some(&pos) = seen_artifacts.get(&key) {
                                report.duplicates += 1;
                                let slot = &mut self.artifacts_mut(&a.vuln_id).expect("seen")[pos];
                                if (a.date, &a.source) < (slot.date, &slot.source) {
                                    *slot = a;
                                }
                                continue;
                            }
                            seen_artifacts.insert(key, self.artifacts(&a.vuln_id).len());
                        }
                        self.add_artifact(a).expect("reference checked");
                        report.added += 1;
                    }
                    Err(e) => skip(e.to_string()),
                },
                Schema::Evidence => match serde_json::from_str::<ExploitEvidence>(&line) {
                    Ok(e) if !self.vulns.contains_key(&e.vuln_id) => {
                        skip(format!("unknown vulnerability {}", e.vuln_id))
                    }
                    Ok(e) => {
                        if opts.dedupe && !seen_evidence.insert(serde_json::to_string(&e).unwrap_or_default()) {
                            report.duplicates += 1;
                            continue;
                        }
                        self.add_evidence(e).expect("reference checked");
                        report.added += 1;
                    }
                    Err(e) => skip(e.to_string()),
                },
            }
        }
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    const VULN: &str = r#"{"id":"CVE-2018-8174","description":"VBScript engine RCE","cwe_ids":["CWE-787"],"products":["windows"],"nvd_published":"2018-05-09"}"#;

    fn ingest(store: &mut CorpusStore, text: &str, schema: Schema, dedupe: bool) -> IngestReport {
        store
            .ingest_reader(Cursor::new(text.to_string()), schema, &IngestOptions { dedupe })
            .unwrap()
    }

    #[test]
    fn one_valid_line_adds_one() {
        let mut s = CorpusStore::new();
        let r = ingest(&mut s, VULN, Schema::Vulns, false);
        assert_eq!((s.len(), r.added, r.skipped), (1, 1, 0));
    }

    #[test]
    fn empty_file_is_a_no_op() {
        let mut s = CorpusStore::new();
        let r = ingest(&mut s, "", Schema::Vulns, false);
        assert_eq!((s.len(), r.added, r.skipped), (0, 0, 0));
    }

    #[test]
    fn missing_id_line_is_skipped() {
        let text = format!(
            "{VULN}\n{{\"description\":\"no id here\"}}\n{}\n",
            r#"{"id":"CVE-2019-0604","nvd_published":"2019-03-05"}"#
        );
        let mut s = CorpusStore::new();
        let r = ingest(&mut s, &text, Schema::Vulns, false);
        assert_eq!(s.len(), 2);
        assert_eq!(r.added, 2);
        assert_eq!(r.skipped, 1);
        assert_eq!(r.diagnostics[0].line, 2);
    }

    #[test]
    fn month_granularity_dates_are_rejected() {
        let mut s = CorpusStore::new();
        let r = ingest(
            &mut s,
            r#"{"id":"CVE-1","nvd_published":"2019-05"}"#,
            Schema::Vulns,
            false,
        );
        assert_eq!((r.added, r.skipped), (0, 1));
    }

    #[test]
    fn artifacts_need_a_known_vuln_and_decode_b64() {
        let mut s = CorpusStore::new();
        ingest(&mut s, VULN, Schema::Vulns, false);
        let lines = concat!(
            r#"{"vuln_id":"CVE-2018-8174","kind":"poc","date":"2018-05-10","source":"edb","content":"/wA=","encoding":"b64","ext":".c"}"#,
            "\n",
            r#"{"vuln_id":"CVE-0000-0000","kind":"poc","date":"2018-05-10","source":"edb","content":"x"}"#,
        );
        let r = ingest(&mut s, lines, Schema::Artifacts, false);
        assert_eq!((r.added, r.skipped), (1, 1));
        let a = &s.artifacts("CVE-2018-8174")[0];
        assert_eq!(a.content, vec![0xff, 0x00]);
        assert_eq!(a.declared_extension.as_deref(), Some(".c"));
        // invalid UTF-8 goes back out as base64
        let json = serde_json::to_string(a).unwrap();
        assert!(json.contains("\"encoding\":\"b64\""));
        let back: ArtifactRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(&back, a);
    }

    #[test]
    fn dedupe_ignores_whitespace_and_keeps_earliest() {
        let mut s = CorpusStore::new();
        ingest(&mut s, VULN, Schema::Vulns, false);
        let lines = concat!(
            r#"{"vuln_id":"CVE-2018-8174","kind":"poc","date":"2018-05-12","source":"b","content":"int  main()\n{ }"}"#,
            "\n",
            r#"{"vuln_id":"CVE-2018-8174","kind":"poc","date":"2018-05-10","source":"a","content":"int main() { }  "}"#,
        );
        let r = ingest(&mut s, lines, Schema::Artifacts, true);
        assert_eq!((r.added, r.duplicates), (1, 1));
        assert_eq!(s.artifacts("CVE-2018-8174")[0].source, "a");
        // re-ingesting the same lines is idempotent
        let r = ingest(&mut s, lines, Schema::Artifacts, true);
        assert_eq!((r.added, r.duplicates), (0, 2));
        assert_eq!(s.artifact_count(), 1);
    }

    #[test]
    fn evidence_with_null_date() {
        let mut s = CorpusStore::new();
        ingest(&mut s, VULN, Schema::Vulns, false);
        let line = r#"{"vuln_id":"CVE-2018-8174","source":"metasploit","kind":"functional","date":null}"#;
        let r = ingest(&mut s, &format!("{line}\n{line}"), Schema::Evidence, true);
        assert_eq!((r.added, r.duplicates), (1, 1));
        assert_eq!(s.evidence("CVE-2018-8174")[0].date, None);
        let r = ingest(
            &mut s,
            r#"{"vuln_id":"CVE-2018-8174","source":"x","kind":"rumour","date":null}"#,
            Schema::Evidence,
            false,
        );
        assert_eq!(r.skipped, 1);
    }
}
