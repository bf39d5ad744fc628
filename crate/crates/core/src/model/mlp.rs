use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ModelError;

/// Index-sorted sparse input row.
pub type SparseRow = Vec<(usize, f64)>;

/// Dense affine layer; `weights` is row-major `outputs × inputs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    pub fn weight(&self, out: usize, inp: usize) -> f64 {
        self.weights[out * self.inputs + inp]
    }
}

/// ReLU hidden layers followed by a single logistic output unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub input_dim: usize,
    pub layers: Vec<Layer>,
}

impl MlpParams {
    pub fn hidden_sizes(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1].iter().map(|l| l.outputs).collect()
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            input_dim: self.input_dim,
            layers: self.layers.iter().map(|l| Layer::zeros(l.inputs, l.outputs)).collect(),
        }
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Weight and bias buffers in a fixed order (layer by layer, weights first).
    pub fn slices(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()])
            .collect()
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weights.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }

    /// Parameter at position `i` of the flattened [`slices`](Self::slices) order.
    pub fn get_flat(&self, mut i: usize) -> f64 {
        for s in self.slices() {
            if i < s.len() {
                return s[i];
            }
            i -= s.len();
        }
        panic!("flat index out of range");
    }

    pub fn set_flat(&mut self, mut i: usize, v: f64) {
        for s in self.slices_mut() {
            if i < s.len() {
                s[i] = v;
                return;
            }
            i -= s.len();
        }
        panic!("flat index out of range");
    }

    pub fn is_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|x| x.is_finite()))
    }

    /// SHA-256 over the architecture and the bit patterns of every parameter.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.input_dim as u64).to_le_bytes());
        for l in &self.layers {
            h.update((l.outputs as u64).to_le_bytes());
        }
        for s in self.slices() {
            for x in s {
                h.update(x.to_bits().to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }
}

/// He-uniform weights for the ReLU layers, Glorot-uniform for the output
/// unit, zero biases.
pub fn init_params(d: usize, hidden: &[usize], seed: u64) -> Result<MlpParams, ModelError> {
    if d == 0 {
        return Err(ModelError::ZeroDim);
    }
    if hidden.contains(&0) {
        return Err(ModelError::InvalidConfig("hidden layer of size 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sizes = vec![d];
    sizes.extend_from_slice(hidden);
    sizes.push(1);
    let n = sizes.len() - 1;
    let layers = (0..n)
        .map(|k| {
            let (fan_in, fan_out) = (sizes[k], sizes[k + 1]);
            let limit = if k + 1 < n {
                (6.0 / fan_in as f64).sqrt()
            } else {
                (6.0 / (fan_in + fan_out) as f64).sqrt()
            };
            let mut l = Layer::zeros(fan_in, fan_out);
            for w in l.weights.iter_mut() {
                *w = rng.gen_range(-limit..limit);
            }
            l
        })
        .collect();
    Ok(MlpParams { input_dim: d, layers })
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Pre-activations of every layer for one input.
pub(crate) struct Cache {
    pub pre: Vec<Vec<f64>>,
}

impl Cache {
    pub fn logit(&self) -> f64 {
        self.pre.last().expect("output layer")[0]
    }

    fn hidden_out(&self, layer: usize) -> impl Iterator<Item = f64> + '_ {
        self.pre[layer].iter().map(|z| z.max(0.0))
    }
}

pub(crate) fn check_row(params: &MlpParams, x: &[(usize, f64)]) -> Result<(), ModelError> {
    match x.iter().find(|(i, _)| *i >= params.input_dim) {
        Some((i, _)) => Err(ModelError::FeatureOutOfRange {
            index: *i,
            dim: params.input_dim,
        }),
        None => Ok(()),
    }
}

pub(crate) fn forward_cache(params: &MlpParams, x: &[(usize, f64)]) -> Cache {
    let mut pre = Vec::with_capacity(params.layers.len());
    let first = &params.layers[0];
    let mut z = first.bias.clone();
    for &(k, v) in x {
        for (o, zo) in z.iter_mut().enumerate() {
            *zo += first.weights[o * first.inputs + k] * v;
        }
    }
    pre.push(z);
    for l in &params.layers[1..] {
        let input: Vec<f64> = pre.last().expect("previous layer").iter().map(|z| z.max(0.0)).collect();
        let z: Vec<f64> = (0..l.outputs)
            .map(|o| {
                let row = &l.weights[o * l.inputs..(o + 1) * l.inputs];
                l.bias[o] + row.iter().zip(&input).map(|(w, a)| w * a).sum::<f64>()
            })
            .collect();
        pre.push(z);
    }
    Cache { pre }
}

/// Output probability for one input.
pub fn forward(params: &MlpParams, x: &[(usize, f64)]) -> Result<f64, ModelError> {
    check_row(params, x)?;
    Ok(sigmoid(forward_cache(params, x).logit()))
}

/// Accumulates into `grads` the gradient of a loss whose derivative with
/// respect to this input's output logit is `dlogit`.
pub(crate) fn backward(params: &MlpParams, x: &[(usize, f64)], cache: &Cache, dlogit: f64, grads: &mut MlpParams) {
    let n = params.layers.len();
    let mut delta = vec![dlogit];
    for k in (0..n).rev() {
        let l = &params.layers[k];
        let g = &mut grads.layers[k];
        if k == 0 {
            for (o, d) in delta.iter().enumerate() {
                if *d == 0.0 {
                    continue;
                }
                g.bias[o] += d;
                for &(i, v) in x {
                    g.weights[o * l.inputs + i] += d * v;
                }
            }
            break;
        }
        let input: Vec<f64> = cache.hidden_out(k - 1).collect();
        for (o, d) in delta.iter().enumerate() {
            g.bias[o] += d;
            let row = &mut g.weights[o * l.inputs..(o + 1) * l.inputs];
            for (gw, a) in row.iter_mut().zip(&input) {
                *gw += d * a;
            }
        }
        let prev_pre = &cache.pre[k - 1];
        delta = (0..l.inputs)
            .map(|i| {
                if prev_pre[i] > 0.0 {
                    delta
                        .iter()
                        .enumerate()
                        .map(|(o, d)| l.weights[o * l.inputs + i] * d)
                        .sum()
                } else {
                    0.0
                }
            })
            .collect();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_deterministic_and_shaped() {
        let a = init_params(3, &[500, 100], 1).unwrap();
        let b = init_params(3, &[500, 100], 1).unwrap();
        let c = init_params(3, &[500, 100], 2).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.layers[0].weights.len(), 500 * 3);
        assert_eq!(a.layers[1].weights.len(), 100 * 500);
        assert_eq!(a.layers[2].weights.len(), 100);
        assert!(a.layers.iter().all(|l| l.bias.iter().all(|b| *b == 0.0)));
        assert!(matches!(init_params(0, &[4], 1), Err(ModelError::ZeroDim)));
    }

    #[test]
    fn zero_params_give_half() {
        let p = init_params(4, &[3, 2], 0).unwrap().zeros_like();
        assert_eq!(forward(&p, &[]).unwrap(), 0.5);
        let mut q = init_params(4, &[3, 2], 0).unwrap();
        q.layers[2].weights.iter_mut().for_each(|w| *w = 0.0);
        assert_eq!(forward(&q, &[(0, 3.0), (2, -1.0)]).unwrap(), 0.5);
    }

    #[test]
    fn matches_dense_reference() {
        let p = init_params(5, &[4, 3], 9).unwrap();
        let x = [(1usize, 0.5), (3, 2.0)];
        let mut dense = vec![0.0; 5];
        for (i, v) in x {
            dense[i] = v;
        }
        // hand-rolled dense evaluation
        let mut a = dense;
        for (k, l) in p.layers.iter().enumerate() {
            let mut z = vec![0.0; l.outputs];
            for (o, zo) in z.iter_mut().enumerate() {
                *zo = l.bias[o];
                for (i, ai) in a.iter().enumerate() {
                    *zo += l.weight(o, i) * ai;
                }
            }
            a = if k + 1 < p.layers.len() {
                z.iter().map(|v| v.max(0.0)).collect()
            } else {
                z
            };
        }
        let want = 1.0 / (1.0 + (-a[0]).exp());
        assert!((forward(&p, &x).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn out_of_range_feature_is_an_error() {
        let p = init_params(2, &[2], 0).unwrap();
        assert!(matches!(
            forward(&p, &[(2, 1.0)]),
            Err(ModelError::FeatureOutOfRange { index: 2, dim: 2 })
        ));
    }

    #[test]
    fn flat_access_roundtrip() {
        let mut p = init_params(3, &[2], 0).unwrap();
        assert_eq!(p.n_params(), 3 * 2 + 2 + 2 + 1);
        p.set_flat(9, 4.5);
        assert_eq!(p.get_flat(9), 4.5);
        assert_eq!(p.layers[1].weights[1], 4.5);
    }
}
