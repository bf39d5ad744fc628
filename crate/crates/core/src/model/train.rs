use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{loss_grad, Objective};
use super::mlp::{check_row, init_params, MlpParams};
use super::ModelError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub shuffle: bool,
    pub hidden: Vec<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 128,
            learning_rate: 5e-6,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
            shuffle: true,
            hidden: vec![500, 100],
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::InvalidConfig(m.to_string()));
        if self.epochs == 0 || self.batch_size == 0 {
            return bad("epochs and batch_size must be positive");
        }
        if !(self.learning_rate > 0.0 && self.epsilon > 0.0) {
            return bad("learning_rate and epsilon must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("adam betas must lie in [0,1)");
        }
        if self.hidden.contains(&0) {
            return bad("hidden layer of size 0");
        }
        Ok(())
    }
}

/// Adam moment estimates, laid out like the parameters.
#[derive(Debug, Clone)]
pub struct Adam {
    m: MlpParams,
    v: MlpParams,
    t: i32,
}

impl Adam {
    pub fn new(params: &MlpParams) -> Self {
        Self {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut MlpParams, grads: &MlpParams, cfg: &TrainConfig) {
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.t);
        let c2 = 1.0 - cfg.beta2.powi(self.t);
        let ps = params.slices_mut();
        let gs = grads.slices();
        let ms = self.m.slices_mut();
        let vs = self.v.slices_mut();
        for (((p, g), m), v) in ps.into_iter().zip(gs).zip(ms).zip(vs) {
            for i in 0..p.len() {
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
                let mh = m[i] / c1;
                let vh = v[i] / c2;
                p[i] -= cfg.learning_rate * mh / (vh.sqrt() + cfg.epsilon);
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: MlpParams,
    /// Size-weighted mean batch loss of each epoch.
    pub loss_trace: Vec<f64>,
}

/// Trains a fresh network on `rows` (index-sorted sparse inputs of width `dim`).
pub fn train_rows(
    rows: &[Vec<(usize, f64)>],
    labels: &[u8],
    dim: usize,
    obj: &Objective,
    is_lr: bool,
    cfg: &TrainConfig,
) -> Result<TrainOutcome, ModelError> {
    cfg.validate()?;
    if rows.is_empty() {
        return Err(ModelError::EmptyInput);
    }
    if rows.len() != labels.len() {
        return Err(ModelError::InvalidConfig(format!(
            "{} rows but {} labels",
            rows.len(),
            labels.len()
        )));
    }
    let positives = labels.iter().filter(|y| **y != 0).count();
    if positives == 0 || positives == labels.len() {
        if is_lr && positives == labels.len() {
            return Err(ModelError::SingleClass);
        }
        log::warn!(
            "training data has a single class ({positives} positives of {})",
            labels.len()
        );
    }
    let mut params = init_params(dim, &cfg.hidden, cfg.seed)?;
    rows.iter().try_for_each(|r| check_row(&params, r))?;

    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    shuffle_rng.set_stream(1);
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let mut adam = Adam::new(&params);
    let mut trace = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        if cfg.shuffle {
            order.shuffle(&mut shuffle_rng);
        }
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&[(usize, f64)]> = chunk.iter().map(|i| rows[*i].as_slice()).collect();
            let ys: Vec<u8> = chunk.iter().map(|i| labels[*i]).collect();
            let (l, g) = loss_grad(&params, &batch, &ys, obj)?;
            total += l * chunk.len() as f64;
            adam.step(&mut params, &g, cfg);
        }
        if !params.is_finite() {
            return Err(ModelError::NonFinite);
        }
        let mean = total / rows.len() as f64;
        log::debug!("epoch {epoch}: loss {mean:.6}");
        trace.push(mean);
    }
    Ok(TrainOutcome {
        params,
        loss_trace: trace,
    })
}
