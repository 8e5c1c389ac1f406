//! Fully connected ReLU network trained with Adam.
//!
//! Two classes use a single sigmoid output with binary cross-entropy; more
//! classes use a softmax layer with categorical cross-entropy. Parameters are
//! stored flat, layer by layer, each layer as its `out x in` weight matrix
//! (row-major) followed by its biases.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::params::MlpParams;
use super::{sigmoid, softmax_in_place, Encoded};
use crate::seed;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Mlp {
    /// Layer widths from input to output.
    sizes: Vec<usize>,
    n_classes: usize,
    params: Vec<f64>,
}

/// Activations kept for the backward pass.
struct Trace {
    /// Post-activation (and post-dropout) values per layer, input included.
    acts: Vec<Vec<f64>>,
    /// Dropout multipliers for each hidden layer (1 when inactive).
    masks: Vec<Vec<f64>>,
}

impl Mlp {
    /// Network with Glorot-uniform weights and zero biases.
    pub fn init(n_inputs: usize, hidden: &[usize], n_classes: usize, rng: &mut ChaCha8Rng) -> Self {
        let out = if n_classes == 2 { 1 } else { n_classes };
        let mut sizes = vec![n_inputs];
        sizes.extend_from_slice(hidden);
        sizes.push(out);
        let mut params = Vec::new();
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            params.extend((0..fan_in * fan_out).map(|_| rng.random_range(-limit..=limit)));
            params.extend(std::iter::repeat_n(0.0, fan_out));
        }
        Self {
            sizes,
            n_classes,
            params,
        }
    }

    pub(crate) fn fit(data: &Encoded<'_>, p: &MlpParams, seed: u64) -> Self {
        let n_inputs = data.x.first().map_or(0, Vec::len);
        let mut rng = seed::rng(seed::derive(seed, &[seed::tag("mlp")]));
        let mut net = Self::init(n_inputs, &p.hidden, data.n_classes, &mut rng);
        let mut m = vec![0.0; net.params.len()];
        let mut v = vec![0.0; net.params.len()];
        let mut step = 0i32;
        let mut order: Vec<usize> = (0..data.x.len()).collect();
        let mut grad = vec![0.0; net.params.len()];
        for _ in 0..p.epochs {
            order.shuffle(&mut rng);
            for batch in order.chunks(p.batch_size.max(1)) {
                grad.iter_mut().for_each(|g| *g = 0.0);
                for &i in batch {
                    let trace = net.forward(&data.x[i], p.dropout, Some(&mut rng));
                    net.backward(&trace, data.y[i], &mut grad);
                }
                let scale = 1.0 / batch.len() as f64;
                step += 1;
                let bc1 = 1.0 - p.beta1.powi(step);
                let bc2 = 1.0 - p.beta2.powi(step);
                for (k, theta) in net.params.iter_mut().enumerate() {
                    let g = grad[k] * scale;
                    m[k] = p.beta1 * m[k] + (1.0 - p.beta1) * g;
                    v[k] = p.beta2 * v[k] + (1.0 - p.beta2) * g * g;
                    *theta -= p.learning_rate * (m[k] / bc1) / ((v[k] / bc2).sqrt() + p.epsilon);
                }
            }
        }
        net
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn layer_offsets(&self) -> Vec<usize> {
        let mut offsets = vec![0];
        for w in self.sizes.windows(2) {
            let last = *offsets.last().unwrap();
            offsets.push(last + w[0] * w[1] + w[1]);
        }
        offsets
    }

    /// Raw output-layer values (logits) plus the trace.
    fn forward(&self, row: &[f64], dropout: f64, mut rng: Option<&mut ChaCha8Rng>) -> Trace {
        let offsets = self.layer_offsets();
        let n_layers = self.sizes.len() - 1;
        let mut acts = vec![row.to_vec()];
        let mut masks = Vec::new();
        for l in 0..n_layers {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.params[offsets[l]..offsets[l] + fan_in * fan_out];
            let b = &self.params[offsets[l] + fan_in * fan_out..offsets[l + 1]];
            let input = acts.last().unwrap();
            let mut z: Vec<f64> = (0..fan_out)
                .map(|o| b[o] + w[o * fan_in..(o + 1) * fan_in].iter().zip(input).map(|(a, x)| a * x).sum::<f64>())
                .collect();
            if l + 1 < n_layers {
                let mut mask = vec![1.0; fan_out];
                if let Some(r) = rng.as_deref_mut().filter(|_| dropout > 0.0) {
                    let keep = 1.0 - dropout;
                    for m in mask.iter_mut() {
                        *m = if r.random::<f64>() < keep { 1.0 / keep } else { 0.0 };
                    }
                }
                for (zi, m) in z.iter_mut().zip(&mask) {
                    *zi = zi.max(0.0) * m;
                }
                masks.push(mask);
            }
            acts.push(z);
        }
        Trace { acts, masks }
    }

    /// Loss of one example given output logits.
    fn example_loss(&self, logits: &[f64], y: usize) -> f64 {
        if self.n_classes == 2 {
            let z = logits[0];
            let t = y as f64;
            // softplus(z) - t z, stable
            z.max(0.0) + (-z.abs()).exp().ln_1p() - t * z
        } else {
            let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
            lse - logits[y]
        }
    }

    /// Accumulates the gradient of one example's loss into `grad`.
    fn backward(&self, trace: &Trace, y: usize, grad: &mut [f64]) {
        let offsets = self.layer_offsets();
        let n_layers = self.sizes.len() - 1;
        let logits = trace.acts.last().unwrap();
        let mut delta: Vec<f64> = if self.n_classes == 2 {
            vec![sigmoid(logits[0]) - y as f64]
        } else {
            let mut p = logits.clone();
            softmax_in_place(&mut p);
            p[y] -= 1.0;
            p
        };
        for l in (0..n_layers).rev() {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            let input = &trace.acts[l];
            let base = offsets[l];
            for o in 0..fan_out {
                let d = delta[o];
                for (i, x) in input.iter().enumerate() {
                    grad[base + o * fan_in + i] += d * x;
                }
                grad[base + fan_in * fan_out + o] += d;
            }
            if l > 0 {
                let w = &self.params[base..base + fan_in * fan_out];
                let mask = &trace.masks[l - 1];
                delta = (0..fan_in)
                    .map(|i| {
                        if input[i] > 0.0 {
                            mask[i] * (0..fan_out).map(|o| w[o * fan_in + i] * delta[o]).sum::<f64>()
                        } else {
                            0.0
                        }
                    })
                    .collect();
            }
        }
    }

    /// Mean loss over a batch and its gradient with respect to the flat
    /// parameters, with dropout disabled.
    pub fn loss_and_gradient(&self, x: &[Vec<f64>], y: &[usize]) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.params.len()];
        let mut loss = 0.0;
        for (row, &label) in x.iter().zip(y) {
            let trace = self.forward(row, 0.0, None);
            loss += self.example_loss(trace.acts.last().unwrap(), label);
            self.backward(&trace, label, &mut grad);
        }
        let n = x.len().max(1) as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        (loss / n, grad)
    }

    pub fn proba_into(&self, row: &[f64], out: &mut [f64]) {
        let trace = self.forward(row, 0.0, None);
        let logits = trace.acts.last().unwrap();
        if self.n_classes == 2 {
            let p1 = sigmoid(logits[0]);
            out[0] = 1.0 - p1;
            out[1] = p1;
        } else {
            out.copy_from_slice(logits);
            softmax_in_place(out);
        }
    }
}
