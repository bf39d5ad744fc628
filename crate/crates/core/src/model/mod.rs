//! Feed-forward EE classifier trained with BCE or one of three noise-aware
//! losses (label regularization, forward correction and feature-dependent
//! forward correction).

mod loss;
mod mlp;
mod train;

pub use loss::{bernoulli_kl, loss, loss_grad, output_loss, LossSpec, Objective, PROB_EPS};
pub use mlp::{forward, init_params, sigmoid, Layer, MlpParams, SparseRow};
pub use train::{train_rows, Adam, TrainConfig, TrainOutcome};

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("feature dimension must be at least 1")]
    ZeroDim,
    #[error("empty training or scoring input")]
    EmptyInput,
    #[error("feature index {index} out of range for dimension {dim}")]
    FeatureOutOfRange { index: usize, dim: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("label regularization needs negative examples, but every label is positive")]
    SingleClass,
    #[error("parameters became non-finite during training")]
    NonFinite,
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed model file {path}: {message}")]
    Malformed { path: PathBuf, message: String },
    #[error("model format version {found} is not supported (expected {expected})")]
    Version { found: u32, expected: u32 },
}

/// One EE score: the model's output for a vulnerability observed at date `z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EEScore {
    pub vuln_id: String,
    pub z: NaiveDate,
    pub value: f64,
    pub model_id: String,
}

/// A trained model together with what is needed to reproduce and apply it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub params: MlpParams,
    pub loss: LossSpec,
    pub train: TrainConfig,
    /// Hash of the feature index the inputs were built against.
    pub feature_fingerprint: String,
    #[serde(default)]
    pub loss_trace: Vec<f64>,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

impl ModelFile {
    pub fn new(params: MlpParams, loss: LossSpec, train: TrainConfig, feature_fingerprint: String) -> Self {
        Self {
            format_version: MODEL_FORMAT_VERSION,
            params,
            loss,
            train,
            feature_fingerprint,
            loss_trace: Vec::new(),
            metadata: BTreeMap::new(),
        }
    }

    /// Short identifier derived from the parameter hash.
    pub fn model_id(&self) -> String {
        self.params.hash()[..16].to_string()
    }

    pub fn score(&self, vuln_id: &str, z: NaiveDate, x: &[(usize, f64)]) -> Result<EEScore, ModelError> {
        Ok(EEScore {
            vuln_id: vuln_id.to_string(),
            z,
            value: forward(&self.params, x)?,
            model_id: self.model_id(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        let mut bytes = serde_json::to_vec(self).expect("model serializes");
        bytes.push(b'\n');
        std::fs::write(path, bytes).map_err(|source| ModelError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let bytes = std::fs::read(path).map_err(|source| ModelError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let malformed = |message: String| ModelError::Malformed {
            path: path.to_path_buf(),
            message,
        };
        let value: serde_json::Value = serde_json::from_slice(&bytes).map_err(|e| malformed(e.to_string()))?;
        let found = value
            .get("format_version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| malformed("missing format_version".into()))? as u32;
        if found != MODEL_FORMAT_VERSION {
            return Err(ModelError::Version {
                found,
                expected: MODEL_FORMAT_VERSION,
            });
        }
        let m: ModelFile = serde_json::from_value(value).map_err(|e| malformed(e.to_string()))?;
        m.check_shape().map_err(malformed)?;
        Ok(m)
    }

    fn check_shape(&self) -> Result<(), String> {
        let p = &self.params;
        if p.layers.is_empty() || p.input_dim == 0 {
            return Err("no layers".into());
        }
        let mut prev = p.input_dim;
        for (k, l) in p.layers.iter().enumerate() {
            if l.inputs != prev || l.weights.len() != l.inputs * l.outputs || l.bias.len() != l.outputs {
                return Err(format!("layer {k} has inconsistent shape"));
            }
            prev = l.outputs;
        }
        if prev != 1 {
            return Err("output layer must have one unit".into());
        }
        if !p.is_finite() {
            return Err("non-finite parameter".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> ModelFile {
        let p = init_params(4, &[3, 2], 5).unwrap();
        ModelFile::new(p, LossSpec::Fc { prior: 0.1 }, TrainConfig::default(), "abc".into())
    }

    #[test]
    fn save_load_roundtrip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let m = model();
        m.save(&path).unwrap();
        let back = ModelFile::load(&path).unwrap();
        assert_eq!(back.params.hash(), m.params.hash());
        let z = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        let x = [(0usize, 0.3), (3, 1.0)];
        let a = m.score("CVE-1", z, &x).unwrap();
        let b = back.score("CVE-1", z, &x).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert!(a.value > 0.0 && a.value < 1.0);
    }

    #[test]
    fn corrupted_and_wrong_version_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        std::fs::write(&path, b"{\"format_version\": 1, \"params\": [").unwrap();
        assert!(matches!(ModelFile::load(&path), Err(ModelError::Malformed { .. })));
        let mut m = model();
        m.format_version = 99;
        m.save(&path).unwrap();
        assert!(matches!(
            ModelFile::load(&path),
            Err(ModelError::Version { found: 99, .. })
        ));
        let mut m = model();
        m.params.layers[1].bias.pop();
        m.save(&path).unwrap();
        assert!(matches!(ModelFile::load(&path), Err(ModelError::Malformed { .. })));
        assert!(matches!(
            ModelFile::load(&dir.path().join("nope")),
            Err(ModelError::Io { .. })
        ));
    }

    #[test]
    fn output_bias_gradient_is_mean_residual() {
        let p = init_params(3, &[4], 11).unwrap();
        let rows: Vec<Vec<(usize, f64)>> = vec![vec![(0, 1.0)], vec![(1, 0.5), (2, -2.0)], vec![]];
        let ys = [1u8, 0, 1];
        let refs: Vec<&[(usize, f64)]> = rows.iter().map(|r| r.as_slice()).collect();
        let (_, g) = loss_grad(&p, &refs, &ys, &Objective::bce()).unwrap();
        let want: f64 = rows
            .iter()
            .zip(&ys)
            .map(|(r, y)| forward(&p, r).unwrap() - *y as f64)
            .sum::<f64>()
            / 3.0;
        assert!((g.layers[1].bias[0] - want).abs() < 1e-12);
    }

    #[test]
    fn fc_without_noise_is_bce_bitwise() {
        let p = init_params(3, &[4, 2], 3).unwrap();
        let rows: Vec<Vec<(usize, f64)>> = vec![vec![(0, 1.0)], vec![(1, 0.5), (2, -2.0)], vec![(2, 3.0)]];
        let refs: Vec<&[(usize, f64)]> = rows.iter().map(|r| r.as_slice()).collect();
        let ys = [1u8, 0, 0];
        let fc = Objective::new(&LossSpec::Fc { prior: 0.0 }, |_| None).unwrap();
        let ffc = Objective::new(
            &LossSpec::Ffc {
                feature_priors: BTreeMap::new(),
            },
            |_| None,
        )
        .unwrap();
        let (lb, gb) = loss_grad(&p, &refs, &ys, &Objective::bce()).unwrap();
        for obj in [fc, ffc] {
            let (l, g) = loss_grad(&p, &refs, &ys, &obj).unwrap();
            assert_eq!(l.to_bits(), lb.to_bits());
            assert_eq!(g.hash(), gb.hash());
        }
    }
}
