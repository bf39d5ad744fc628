use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use ee_core::corpus::IngestOptions;
use ee_core::experiment::ExperimentConfig;
use ee_core::model::LossSpec;
use ee_core::noise::CHI2_ALPHA;
use ee_core::synth::SynthConfig;

/// Everything a run depends on. Loaded from a JSON file (every field
/// optional), then overridden by command-line flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub corpus_dir: PathBuf,
    /// Output directory of a previous `train` run, read by `score` and `evaluate`.
    pub model_dir: Option<PathBuf>,
    pub out_dir: PathBuf,
    /// Language-identification model from `langid-train`; the built-in
    /// synthetic model is used when absent.
    pub langid_model: Option<PathBuf>,
    /// When set, replaces the seeds of `synth` and `experiment.train`.
    pub seed: Option<u64>,
    pub ingest: IngestOptions,
    pub experiment: ExperimentConfig,
    pub synth: SynthConfig,
    pub chi2: Chi2Config,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            corpus_dir: PathBuf::from("corpus"),
            model_dir: None,
            out_dir: PathBuf::from("out"),
            langid_model: None,
            seed: None,
            ingest: IngestOptions::default(),
            experiment: ExperimentConfig::default(),
            synth: SynthConfig::default(),
            chi2: Chi2Config::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Chi2Config {
    /// Evidence sources to test; all sources in the corpus when empty.
    pub sources: Vec<String>,
    /// `cwe:<id>` / `cpe:<product>` features; every CWE and product listed by
    /// at least `min_count` records when empty.
    pub features: Vec<String>,
    pub min_count: usize,
    pub alpha: f64,
    pub yates: bool,
}

impl Default for Chi2Config {
    fn default() -> Self {
        Self {
            sources: Vec::new(),
            features: Vec::new(),
            min_count: 20,
            alpha: CHI2_ALPHA,
            yates: false,
        }
    }
}

/// Flags that override config-file values.
#[derive(Debug, Clone, Default, clap::Args, Serialize)]
pub struct Overrides {
    /// Run configuration (JSON). Unlisted fields keep their defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Corpus directory holding vulns.jsonl, artifacts.jsonl, evidence.jsonl.
    #[arg(long, global = true)]
    pub corpus: Option<PathBuf>,
    /// Output directory of a previous `train` run.
    #[arg(long, global = true)]
    pub models: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Language-identification model written by `langid-train`.
    #[arg(long, global = true)]
    pub langid_model: Option<PathBuf>,
    /// Hidden layer sizes, comma separated (e.g. 500,100).
    #[arg(long, global = true, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
    #[arg(long, global = true)]
    pub epochs: Option<usize>,
    #[arg(long, global = true)]
    pub learning_rate: Option<f64>,
    #[arg(long, global = true)]
    pub batch_size: Option<usize>,
    /// Training loss: bce, lr, fc or ffc. Priors come from the config file.
    #[arg(long, global = true)]
    pub loss: Option<String>,
    /// Worker threads for artifact analysis (0 = all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Defaults, then the config file, then flags.
    pub fn resolve(o: &Overrides) -> Result<Self> {
        let mut c = match &o.config {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        if let Some(p) = &o.corpus {
            c.corpus_dir = p.clone();
        }
        if let Some(p) = &o.models {
            c.model_dir = Some(p.clone());
        }
        if let Some(p) = &o.out {
            c.out_dir = p.clone();
        }
        if let Some(p) = &o.langid_model {
            c.langid_model = Some(p.clone());
        }
        if o.seed.is_some() {
            c.seed = o.seed;
        }
        let t = &mut c.experiment.train;
        if let Some(h) = &o.hidden {
            t.hidden = h.clone();
        }
        if let Some(e) = o.epochs {
            t.epochs = e;
        }
        if let Some(lr) = o.learning_rate {
            t.learning_rate = lr;
        }
        if let Some(b) = o.batch_size {
            t.batch_size = b;
        }
        if let Some(n) = o.threads {
            c.experiment.featurize.threads = n;
        }
        if let Some(name) = &o.loss {
            c.experiment.loss = loss_named(name, &c.experiment.loss)?;
        }
        if let Some(s) = c.seed {
            c.synth.seed = s;
            c.experiment.train.seed = s;
        }
        c.experiment.train.validate()?;
        c.experiment.loss.validate()?;
        Ok(c)
    }
}

/// The loss called `name`, keeping the parameters of `current` if it is
/// already of that kind.
fn loss_named(name: &str, current: &LossSpec) -> Result<LossSpec> {
    if current.name() == name {
        return Ok(current.clone());
    }
    Ok(match name {
        "bce" => LossSpec::Bce,
        "lr" => LossSpec::Lr {
            lambda: 1.0,
            prior: 0.0,
        },
        "fc" => LossSpec::Fc { prior: 0.0 },
        "ffc" => LossSpec::Ffc {
            feature_priors: Default::default(),
        },
        other => bail!("unknown loss {other:?} (expected bce, lr, fc or ffc)"),
    })
}
