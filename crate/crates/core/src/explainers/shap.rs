use serde::{Deserialize, Serialize};

use super::explained_outputs;
use crate::error::{Error, Result};
use crate::models::ProbabilisticModel;
use crate::par;

/// Largest feature count handled by coalition enumeration.
pub const EXACT_FEATURE_CAP: usize = 16;

/// Shapley attributions for a batch of instances, one slice per explained
/// model output (the positive class for binary models, every class
/// otherwise).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapMatrix {
    n_instances: usize,
    n_features: usize,
    /// Class id of each explained output.
    output_classes: Vec<u32>,
    /// `[instance][output][feature]`, flattened.
    values: Vec<f64>,
    /// Mean model output over the background, per output.
    base_values: Vec<f64>,
    /// Model output on each instance, `[instance][output]`.
    outputs: Vec<f64>,
}

impl ShapMatrix {
    /// A single-output matrix from explicit attributions; outputs are set so
    /// that efficiency holds.
    pub fn from_attributions(phi: Vec<Vec<f64>>, base_value: f64) -> Result<Self> {
        let n_features = phi.first().map_or(0, Vec::len);
        if let Some(bad) = phi.iter().find(|r| r.len() != n_features) {
            return Err(Error::WidthMismatch {
                expected: n_features,
                actual: bad.len(),
            });
        }
        let outputs = phi.iter().map(|r| r.iter().sum::<f64>() + base_value).collect();
        Ok(Self {
            n_instances: phi.len(),
            n_features,
            output_classes: vec![1],
            values: phi.into_iter().flatten().collect(),
            base_values: vec![base_value],
            outputs,
        })
    }

    pub fn n_instances(&self) -> usize {
        self.n_instances
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn output_classes(&self) -> &[u32] {
        &self.output_classes
    }

    pub fn n_outputs(&self) -> usize {
        self.output_classes.len()
    }

    pub fn phi(&self, instance: usize, output: usize) -> &[f64] {
        let start = (instance * self.n_outputs() + output) * self.n_features;
        &self.values[start..start + self.n_features]
    }

    pub fn base_value(&self, output: usize) -> f64 {
        self.base_values[output]
    }

    pub fn output(&self, instance: usize, output: usize) -> f64 {
        self.outputs[instance * self.n_outputs() + output]
    }

    /// Largest `|sum(phi) + base - f(x)|` over instances and outputs.
    pub fn max_efficiency_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n_instances {
            for o in 0..self.n_outputs() {
                let total: f64 = self.phi(i, o).iter().sum::<f64>() + self.base_value(o);
                worst = worst.max((total - self.output(i, o)).abs());
            }
        }
        worst
    }
}

/// `|S|! (p - |S| - 1)! / p!` indexed by `|S|`.
fn coalition_weights(p: usize) -> Vec<f64> {
    (0..p)
        .map(|s| {
            // 1 / (p * C(p-1, s))
            let mut binom = 1.0;
            for t in 0..s {
                binom = binom * (p - 1 - t) as f64 / (t + 1) as f64;
            }
            1.0 / (p as f64 * binom)
        })
        .collect()
}

/// Exact interventional Shapley values by enumerating all `2^p` coalitions.
///
/// `v(S)` averages the model output over `background` rows with the
/// instance's values substituted on `S`.
pub fn shap_values<M: ProbabilisticModel + ?Sized>(
    model: &M,
    instances: &[Vec<f64>],
    background: &[Vec<f64>],
) -> Result<ShapMatrix> {
    let p = model.feature_count();
    if p > EXACT_FEATURE_CAP {
        return Err(Error::FeatureCap {
            features: p,
            cap: EXACT_FEATURE_CAP,
        });
    }
    if background.is_empty() {
        return Err(Error::EmptyBackground);
    }
    if let Some(bad) = instances.iter().chain(background).find(|r| r.len() != p) {
        return Err(Error::WidthMismatch {
            expected: p,
            actual: bad.len(),
        });
    }
    let all_classes = model.classes();
    let outputs = explained_outputs(all_classes.len());
    let n_out = outputs.len();
    let weights = coalition_weights(p);
    let n_masks = 1usize << p;

    let per_instance = par::map(instances.len(), |i| {
        let x = &instances[i];
        let mut v = vec![0.0; n_masks * n_out];
        let mut hybrid = vec![0.0; p];
        let mut probs = vec![0.0; all_classes.len()];
        for mask in 0..n_masks {
            let slot = &mut v[mask * n_out..(mask + 1) * n_out];
            for b in background {
                for j in 0..p {
                    hybrid[j] = if mask >> j & 1 == 1 { x[j] } else { b[j] };
                }
                model.proba_into(&hybrid, &mut probs);
                for (s, &o) in slot.iter_mut().zip(&outputs) {
                    *s += probs[o];
                }
            }
            slot.iter_mut().for_each(|s| *s /= background.len() as f64);
        }
        let mut phi = vec![0.0; n_out * p];
        for mask in 0..n_masks {
            let size = mask.count_ones() as usize;
            for j in 0..p {
                if mask >> j & 1 == 1 {
                    continue;
                }
                let with = mask | 1 << j;
                for o in 0..n_out {
                    phi[o * p + j] += weights[size] * (v[with * n_out + o] - v[mask * n_out + o]);
                }
            }
        }
        model.proba_into(x, &mut probs);
        let fx: Vec<f64> = outputs.iter().map(|&o| probs[o]).collect();
        (phi, v[..n_out].to_vec(), fx)
    });

    let base_values = match per_instance.first() {
        Some((_, base, _)) => base.clone(),
        None => {
            // No instances: the base value still comes from the background.
            let mut base = vec![0.0; n_out];
            let mut probs = vec![0.0; all_classes.len()];
            for b in background {
                model.proba_into(b, &mut probs);
                for (s, &o) in base.iter_mut().zip(&outputs) {
                    *s += probs[o];
                }
            }
            base.iter_mut().for_each(|s| *s /= background.len() as f64);
            base
        }
    };
    let mut values = Vec::with_capacity(instances.len() * n_out * p);
    let mut fx_all = Vec::with_capacity(instances.len() * n_out);
    for (phi, _, fx) in per_instance {
        values.extend(phi);
        fx_all.extend(fx);
    }
    Ok(ShapMatrix {
        n_instances: instances.len(),
        n_features: p,
        output_classes: outputs.iter().map(|&o| all_classes[o]).collect(),
        values,
        base_values,
        outputs: fx_all,
    })
}

/// Mean absolute attribution per feature, pooled over instances and outputs.
pub fn shap_global(m: &ShapMatrix) -> Vec<f64> {
    let mut scores = vec![0.0; m.n_features];
    let count = (m.n_instances * m.n_outputs()) as f64;
    if count == 0.0 {
        return scores;
    }
    for i in 0..m.n_instances {
        for o in 0..m.n_outputs() {
            for (s, v) in scores.iter_mut().zip(m.phi(i, o)) {
                *s += v.abs();
            }
        }
    }
    scores.iter_mut().for_each(|s| *s /= count);
    scores
}
