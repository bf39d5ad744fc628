use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

/// Output naming and the manifest of one subcommand run. Outputs are named
/// `<subcommand>.<confighash>.<ext>`; the hash covers the subcommand, its
/// arguments and the resolved configuration except the output directory.
pub struct Run {
    pub subcommand: &'static str,
    pub hash: String,
    pub out_dir: PathBuf,
    config: serde_json::Value,
    args: serde_json::Value,
    inputs: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    subcommand: &'a str,
    config_hash: &'a str,
    args: &'a serde_json::Value,
    config: &'a serde_json::Value,
    versions: BTreeMap<&'static str, String>,
    inputs: &'a BTreeMap<String, String>,
    outputs: &'a BTreeMap<String, String>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl Run {
    pub fn new(subcommand: &'static str, args: &impl Serialize, cfg: &RunConfig) -> Result<Self> {
        let config = serde_json::to_value(cfg)?;
        let args = serde_json::to_value(args)?;
        // where outputs go does not change what they contain
        let mut hashed = config.clone();
        if let Some(m) = hashed.as_object_mut() {
            m.remove("out_dir");
        }
        let keyed = serde_json::json!({ "subcommand": subcommand, "args": args, "config": hashed });
        let hash = hex::encode(Sha256::digest(serde_json::to_vec(&keyed)?))[..12].to_string();
        std::fs::create_dir_all(&cfg.out_dir).with_context(|| format!("creating {}", cfg.out_dir.display()))?;
        Ok(Self {
            subcommand,
            hash,
            out_dir: cfg.out_dir.clone(),
            config,
            args,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        })
    }

    /// `<out>/<subcommand>.<hash>.<ext>`
    pub fn path(&self, ext: &str) -> PathBuf {
        self.out_dir.join(format!("{}.{}.{ext}", self.subcommand, self.hash))
    }

    /// `<out>/<subcommand>.<hash>/`, created.
    pub fn dir(&self) -> Result<PathBuf> {
        let d = self.out_dir.join(format!("{}.{}", self.subcommand, self.hash));
        std::fs::create_dir_all(&d).with_context(|| format!("creating {}", d.display()))?;
        Ok(d)
    }

    /// Records the hash of an input file, or of every file under a directory.
    pub fn input(&mut self, path: &Path) -> Result<()> {
        for f in files_under(path)? {
            let h = sha256_file(&f)?;
            self.inputs.insert(f.display().to_string(), h);
        }
        Ok(())
    }

    pub fn write(&mut self, path: &Path, bytes: &[u8]) -> Result<()> {
        std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.output(path)
    }

    pub fn write_json(&mut self, path: &Path, value: &impl Serialize) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write(path, &bytes)
    }

    /// Records an output file (or every file under an output directory).
    pub fn output(&mut self, path: &Path) -> Result<()> {
        for f in files_under(path)? {
            let h = sha256_file(&f)?;
            self.outputs.insert(f.display().to_string(), h);
        }
        Ok(())
    }

    /// Writes `<subcommand>.<hash>.manifest.json` and returns its path.
    pub fn finish(self) -> Result<PathBuf> {
        let versions = [
            ("ee-cli", env!("CARGO_PKG_VERSION").to_string()),
            ("model_format", ee_core::model::MODEL_FORMAT_VERSION.to_string()),
            ("matrix_format", ee_core::pipeline::MATRIX_FORMAT_VERSION.to_string()),
            ("langid_format", ee_core::langid::MODEL_FORMAT_VERSION.to_string()),
        ]
        .into_iter()
        .collect();
        let m = Manifest {
            subcommand: self.subcommand,
            config_hash: &self.hash,
            args: &self.args,
            config: &self.config,
            versions,
            inputs: &self.inputs,
            outputs: &self.outputs,
        };
        let path = self.path("manifest.json");
        let mut bytes = serde_json::to_vec_pretty(&m)?;
        bytes.push(b'\n');
        std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

/// Regular files under `path` in sorted order (just `path` for a file).
fn files_under(path: &Path) -> Result<Vec<PathBuf>> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut out = Vec::new();
    let mut entries: Vec<PathBuf> = std::fs::read_dir(path)
        .with_context(|| format!("listing {}", path.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    entries.sort();
    for e in entries {
        out.extend(files_under(&e)?);
    }
    Ok(out)
}
