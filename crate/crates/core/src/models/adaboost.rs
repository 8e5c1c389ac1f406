//! Real-valued multiclass boosting (SAMME.R) over weighted CART trees.

use serde::{Deserialize, Serialize};

use super::params::{AdaBoostParams, DecisionTreeParams, MaxFeatures};
use super::tree::{grow_classifier, ClassifierSpec, Columns, Tree};
use super::{softmax_in_place, Encoded};
use crate::seed;

const PROBA_FLOOR: f64 = f64::EPSILON;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct AdaBoost {
    trees: Vec<Tree>,
    n_classes: usize,
}

fn clipped_log(p: f64) -> f64 {
    p.max(PROBA_FLOOR).ln()
}

impl AdaBoost {
    pub fn fit(data: &Encoded<'_>, p: &AdaBoostParams, seed: u64) -> Self {
        let n = data.x.len();
        let k = data.n_classes as f64;
        let cols = Columns::new(data.x);
        let base = DecisionTreeParams {
            max_depth: p.base_max_depth,
            min_samples_leaf: p.base_min_samples_leaf,
            min_samples_split: p.base_min_samples_split,
            max_features: MaxFeatures::All,
            ..Default::default()
        };
        // Kept at mean 1 so split sums match an unweighted tree exactly.
        let mut weights = vec![1.0; n];
        let mut trees = Vec::with_capacity(p.n_estimators);
        for m in 0..p.n_estimators {
            let rows: Vec<u32> = (0..n as u32).filter(|&i| weights[i as usize] > 0.0).collect();
            if rows.is_empty() {
                break;
            }
            let tree = grow_classifier(
                data,
                &cols,
                ClassifierSpec {
                    params: &base,
                    weights: &weights,
                    rows,
                    rng_seed: Some(seed::derive(seed, &[seed::tag("stage"), m as u64])),
                },
            );
            let mut error = 0.0;
            for (i, row) in data.x.iter().enumerate() {
                let probs = tree.leaf_value(row);
                let truth = data.y[i];
                if super::argmax(probs) != truth {
                    error += weights[i];
                }
                // y coding: 1 for the true class, -1/(K-1) elsewhere.
                let coded: f64 = probs
                    .iter()
                    .enumerate()
                    .map(|(c, &pc)| {
                        let y = if c == truth { 1.0 } else { -1.0 / (k - 1.0) };
                        y * clipped_log(pc)
                    })
                    .sum();
                weights[i] *= (-p.learning_rate * (k - 1.0) / k * coded).exp();
            }
            trees.push(tree);
            if error <= 0.0 {
                break;
            }
            let total: f64 = weights.iter().sum();
            if !(total > 0.0 && total.is_finite()) {
                break;
            }
            let scale = n as f64 / total;
            weights.iter_mut().for_each(|w| *w *= scale);
        }
        Self {
            trees,
            n_classes: data.n_classes,
        }
    }

    pub fn proba_into(&self, row: &[f64], out: &mut [f64]) {
        let k = self.n_classes as f64;
        out.iter_mut().for_each(|o| *o = 0.0);
        let mut logs = vec![0.0; self.n_classes];
        for tree in &self.trees {
            for (l, &pc) in logs.iter_mut().zip(tree.leaf_value(row)) {
                *l = clipped_log(pc);
            }
            let mean = logs.iter().sum::<f64>() / k;
            for (o, l) in out.iter_mut().zip(&logs) {
                *o += (k - 1.0) * (l - mean);
            }
        }
        let scale = self.trees.len() as f64 * (k - 1.0);
        out.iter_mut().for_each(|o| *o /= scale);
        softmax_in_place(out);
    }
}
