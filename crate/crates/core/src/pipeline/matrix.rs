use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::features::FeatureIndex;
use super::PipelineError;
use crate::SparseVector;

pub const MATRIX_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RowId {
    pub vuln_id: String,
    pub z: NaiveDate,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MatrixMeta {
    pub format_version: u32,
    #[serde(default)]
    pub split_id: Option<usize>,
    #[serde(default)]
    pub train_time: Option<NaiveDate>,
    #[serde(default)]
    pub vocab_fingerprints: BTreeMap<String, String>,
    pub index_fingerprint: String,
}

/// Rows of index-based sparse features with binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub index: FeatureIndex,
    pub row_ids: Vec<RowId>,
    pub rows: Vec<Vec<(usize, f64)>>,
    pub labels: Vec<u8>,
    pub meta: MatrixMeta,
}

#[derive(Serialize, Deserialize)]
struct IndexFile {
    format_version: u32,
    features: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct RowLine {
    vuln_id: String,
    z: NaiveDate,
    x: SparseVector,
}

#[derive(Serialize, Deserialize)]
struct LabelLine {
    vuln_id: String,
    z: NaiveDate,
    y: u8,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn malformed(path: &Path, msg: impl std::fmt::Display) -> PipelineError {
    PipelineError::Malformed {
        path: path.to_path_buf(),
        message: msg.to_string(),
    }
}

impl DesignMatrix {
    pub fn new(index: FeatureIndex, meta: MatrixMeta) -> Self {
        Self {
            index,
            row_ids: Vec::new(),
            rows: Vec::new(),
            labels: Vec::new(),
            meta,
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.index.len()
    }

    pub fn push(&mut self, id: RowId, row: Vec<(usize, f64)>, label: u8) {
        debug_assert!(row.iter().all(|(i, _)| *i < self.index.len()));
        self.row_ids.push(id);
        self.rows.push(row);
        self.labels.push(label);
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|y| **y != 0).count()
    }

    /// Writes `index.json`, `rows.jsonl`, `labels.jsonl` and `meta.json` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<(), PipelineError> {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        let index = IndexFile {
            format_version: MATRIX_FORMAT_VERSION,
            features: self.index.ids().to_vec(),
        };
        let p = dir.join("index.json");
        std::fs::write(&p, serde_json::to_vec_pretty(&index).expect("serializable")).map_err(io_err(&p))?;
        let p = dir.join("meta.json");
        std::fs::write(&p, serde_json::to_vec_pretty(&self.meta).expect("serializable")).map_err(io_err(&p))?;

        let p = dir.join("rows.jsonl");
        let mut w = BufWriter::new(std::fs::File::create(&p).map_err(io_err(&p))?);
        for (id, row) in self.row_ids.iter().zip(&self.rows) {
            let line = RowLine {
                vuln_id: id.vuln_id.clone(),
                z: id.z,
                x: self.index.decode(row),
            };
            serde_json::to_writer(&mut w, &line).expect("serializable");
            w.write_all(b"\n").map_err(io_err(&p))?;
        }
        w.flush().map_err(io_err(&p))?;

        let p = dir.join("labels.jsonl");
        let mut w = BufWriter::new(std::fs::File::create(&p).map_err(io_err(&p))?);
        for (id, y) in self.row_ids.iter().zip(&self.labels) {
            let line = LabelLine {
                vuln_id: id.vuln_id.clone(),
                z: id.z,
                y: *y,
            };
            serde_json::to_writer(&mut w, &line).expect("serializable");
            w.write_all(b"\n").map_err(io_err(&p))?;
        }
        w.flush().map_err(io_err(&p))
    }

    pub fn load(dir: &Path) -> Result<Self, PipelineError> {
        let p = dir.join("index.json");
        let bytes = std::fs::read(&p).map_err(io_err(&p))?;
        let index: IndexFile = serde_json::from_slice(&bytes).map_err(|e| malformed(&p, e))?;
        if index.format_version != MATRIX_FORMAT_VERSION {
            return Err(malformed(
                &p,
                format!("unsupported format version {}", index.format_version),
            ));
        }
        let index = FeatureIndex::new(index.features);
        let p = dir.join("meta.json");
        let bytes = std::fs::read(&p).map_err(io_err(&p))?;
        let meta: MatrixMeta = serde_json::from_slice(&bytes).map_err(|e| malformed(&p, e))?;
        let mut m = DesignMatrix::new(index, meta);

        let p = dir.join("rows.jsonl");
        let rows = BufReader::new(std::fs::File::open(&p).map_err(io_err(&p))?);
        let mut row_lines = Vec::new();
        for (n, line) in rows.lines().enumerate() {
            let line = line.map_err(io_err(&p))?;
            if line.trim().is_empty() {
                continue;
            }
            let r: RowLine = serde_json::from_str(&line).map_err(|e| malformed(&p, format!("line {}: {e}", n + 1)))?;
            let mut row = Vec::with_capacity(r.x.len());
            for (id, x) in r.x.iter() {
                let i = m
                    .index
                    .get(id)
                    .ok_or_else(|| malformed(&p, format!("line {}: feature {id} not in index", n + 1)))?;
                row.push((i, x));
            }
            row.sort_by_key(|(i, _)| *i);
            row_lines.push((
                RowId {
                    vuln_id: r.vuln_id,
                    z: r.z,
                },
                row,
            ));
        }
        let p = dir.join("labels.jsonl");
        let labels = BufReader::new(std::fs::File::open(&p).map_err(io_err(&p))?);
        let mut ys = Vec::new();
        for (n, line) in labels.lines().enumerate() {
            let line = line.map_err(io_err(&p))?;
            if line.trim().is_empty() {
                continue;
            }
            let l: LabelLine =
                serde_json::from_str(&line).map_err(|e| malformed(&p, format!("line {}: {e}", n + 1)))?;
            if l.y > 1 {
                return Err(malformed(&p, format!("line {}: label {} is not binary", n + 1, l.y)));
            }
            ys.push(l);
        }
        if ys.len() != row_lines.len() {
            return Err(malformed(
                dir,
                format!("{} rows but {} labels", row_lines.len(), ys.len()),
            ));
        }
        for ((id, row), l) in row_lines.into_iter().zip(ys) {
            if l.vuln_id != id.vuln_id || l.z != id.z {
                return Err(malformed(
                    dir,
                    format!("label for {} does not match row {}", l.vuln_id, id.vuln_id),
                ));
            }
            m.push(id, row, l.y);
        }
        Ok(m)
    }
}
