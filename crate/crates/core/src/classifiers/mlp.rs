//! Fully connected network `d -> hidden1 -> hidden2 -> 2` with tanh hidden
//! units, softmax output and mean cross-entropy loss, trained by mini-batch
//! gradient descent.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::require_nonempty;
use crate::data::{FeatureDataset, FeatureMatrix};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpParams {
    pub hidden1: usize,
    pub hidden2: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for MlpParams {
    fn default() -> Self {
        MlpParams {
            hidden1: 30,
            hidden2: 30,
            learning_rate: 0.01,
            epochs: 200,
            batch_size: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `outputs x inputs`.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Layer {
    fn n_params(&self) -> usize {
        self.weights.len() + self.biases.len()
    }

    fn forward(&self, input: &[f64], out: &mut [f64]) {
        for (o, v) in out.iter_mut().enumerate() {
            let w = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            *v = self.biases[o] + w.iter().zip(input).map(|(a, b)| a * b).sum::<f64>();
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub layers: Vec<Layer>,
    /// Mean training cross-entropy per epoch.
    pub loss_history: Vec<f64>,
}

/// Per-sample buffers for forward and backward passes.
struct Scratch {
    activations: Vec<Vec<f64>>,
    deltas: Vec<Vec<f64>>,
}

fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    v.iter_mut().for_each(|x| *x /= sum);
}

impl MlpModel {
    /// Glorot-uniform weights, zero biases.
    pub fn initialize(sizes: &[usize], seed: u64) -> Self {
        let mut rng = seed::rng(seed);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (inputs, outputs) = (w[0], w[1]);
                let limit = (6.0 / (inputs + outputs) as f64).sqrt();
                Layer {
                    inputs,
                    outputs,
                    weights: (0..inputs * outputs).map(|_| rng.random_range(-limit..limit)).collect(),
                    biases: vec![0.0; outputs],
                }
            })
            .collect();
        MlpModel {
            layers,
            loss_history: Vec::new(),
        }
    }

    pub fn n_features(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        std::iter::once(self.layers[0].inputs)
            .chain(self.layers.iter().map(|l| l.outputs))
            .collect()
    }

    fn scratch(&self) -> Scratch {
        let sizes = self.layer_sizes();
        Scratch {
            activations: sizes.iter().map(|&s| vec![0.0; s]).collect(),
            deltas: sizes[1..].iter().map(|&s| vec![0.0; s]).collect(),
        }
    }

    fn forward_into(&self, row: &[f64], s: &mut Scratch) {
        s.activations[0].copy_from_slice(row);
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let (before, after) = s.activations.split_at_mut(l + 1);
            let out = &mut after[0];
            layer.forward(&before[l], out);
            if l == last {
                softmax_in_place(out);
            } else {
                out.iter_mut().for_each(|v| *v = v.tanh());
            }
        }
    }

    /// Class probabilities `[P(neg), P(pos)]`.
    pub fn predict_proba(&self, row: &[f64]) -> [f64; 2] {
        let mut s = self.scratch();
        self.forward_into(row, &mut s);
        let out = s.activations.last().expect("network has layers");
        [out[0], out[1]]
    }

    pub fn predict_row(&self, row: &[f64]) -> bool {
        let p = self.predict_proba(row);
        p[1] >= p[0]
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(Layer::n_params).sum()
    }

    /// All weights and biases, layer by layer (weights first).
    pub fn parameters(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            p.extend_from_slice(&l.weights);
            p.extend_from_slice(&l.biases);
        }
        p
    }

    pub fn set_parameters(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.n_params(), "parameter vector length");
        let mut k = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&params[k..k + nw]);
            k += nw;
            let nb = l.biases.len();
            l.biases.copy_from_slice(&params[k..k + nb]);
            k += nb;
        }
    }

    /// Adds the loss gradient of one sample into `grad`; returns its loss.
    fn backprop(&self, row: &[f64], label: bool, s: &mut Scratch, grad: &mut [f64]) -> f64 {
        self.forward_into(row, s);
        let last = self.layers.len() - 1;
        let target = label as usize;
        let probs = &s.activations[last + 1];
        let loss = -probs[target].max(f64::MIN_POSITIVE).ln();
        for (o, d) in s.deltas[last].iter_mut().enumerate() {
            *d = probs[o] - if o == target { 1.0 } else { 0.0 };
        }
        // parameter offsets per layer
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut k = 0;
        for l in &self.layers {
            offsets.push(k);
            k += l.n_params();
        }
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let input = &s.activations[l];
            let delta = &s.deltas[l];
            let off = offsets[l];
            for o in 0..layer.outputs {
                let g = &mut grad[off + o * layer.inputs..off + (o + 1) * layer.inputs];
                for (gi, &a) in g.iter_mut().zip(input) {
                    *gi += delta[o] * a;
                }
                grad[off + layer.weights.len() + o] += delta[o];
            }
            if l > 0 {
                let (lower, upper) = s.deltas.split_at_mut(l);
                let below = &mut lower[l - 1];
                let delta = &upper[0];
                for (i, b) in below.iter_mut().enumerate() {
                    let back: f64 = (0..layer.outputs)
                        .map(|o| layer.weights[o * layer.inputs + i] * delta[o])
                        .sum();
                    let a = s.activations[l][i];
                    *b = back * (1.0 - a * a);
                }
            }
        }
        loss
    }

    /// Mean cross-entropy over the rows and its gradient with respect to
    /// [`parameters`](Self::parameters).
    pub fn loss_and_gradient(&self, rows: &FeatureMatrix, labels: &[bool]) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.n_params()];
        let mut s = self.scratch();
        let mut loss = 0.0;
        for (row, &label) in rows.rows().zip(labels) {
            loss += self.backprop(row, label, &mut s, &mut grad);
        }
        let n = labels.len().max(1) as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        (loss / n, grad)
    }

    pub fn loss(&self, rows: &FeatureMatrix, labels: &[bool]) -> f64 {
        let mut s = self.scratch();
        let total: f64 = rows
            .rows()
            .zip(labels)
            .map(|(row, &label)| {
                self.forward_into(row, &mut s);
                -s.activations.last().expect("layers")[label as usize]
                    .max(f64::MIN_POSITIVE)
                    .ln()
            })
            .sum();
        total / labels.len().max(1) as f64
    }
}

pub fn fit_mlp(train: &FeatureDataset, params: &MlpParams, seed: u64) -> Result<MlpModel> {
    require_nonempty(train)?;
    if params.batch_size == 0 || params.hidden1 == 0 || params.hidden2 == 0 {
        return Err(Error::InvalidInput(
            "mlp batch size and layer widths must be positive".into(),
        ));
    }
    let sizes = [train.n_features(), params.hidden1, params.hidden2, 2];
    let mut model = MlpModel::initialize(&sizes, seed::derive(seed, &[seed::tag("init")]));
    let mut rng = seed::rng(seed::derive(seed, &[seed::tag("shuffle")]));
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut params_vec = model.parameters();
    let mut grad = vec![0.0; params_vec.len()];
    let mut scratch = model.scratch();
    for epoch in 0..params.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(params.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for &i in batch {
                epoch_loss += model.backprop(train.row(i), train.labels()[i], &mut scratch, &mut grad);
            }
            let step = params.learning_rate / batch.len() as f64;
            for (p, g) in params_vec.iter_mut().zip(&grad) {
                *p -= step * g;
            }
            model.set_parameters(&params_vec);
        }
        let epoch_loss = epoch_loss / train.len() as f64;
        if !epoch_loss.is_finite() || params_vec.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFiniteLoss { epoch });
        }
        model.loss_history.push(epoch_loss);
    }
    Ok(model)
}
