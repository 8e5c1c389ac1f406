//! Gradient-boosted regression trees on logistic loss, one-vs-rest beyond two
//! classes. Trees take Newton steps on the per-row gradient and hessian.

use serde::{Deserialize, Serialize};

use super::params::GbdtParams;
use super::tree::{grow_regressor, Columns, RegressorSpec, Tree};
use super::{normalize_ovr, sigmoid, Encoded};

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Booster {
    prior: f64,
    learning_rate: f64,
    trees: Vec<Tree>,
}

impl Booster {
    fn raw(&self, row: &[f64]) -> f64 {
        self.prior + self.learning_rate * self.trees.iter().map(|t| t.leaf_value(row)[0]).sum::<f64>()
    }

    fn fit(cols: &Columns, x: &[Vec<f64>], target: &[f64], p: &GbdtParams) -> Self {
        let n = target.len();
        let pos: f64 = target.iter().sum();
        let prior = (pos / (n as f64 - pos)).ln();
        let mut raw = vec![prior; n];
        let mut grad = vec![0.0; n];
        let mut hess = vec![0.0; n];
        let mut trees = Vec::with_capacity(p.n_estimators);
        for _ in 0..p.n_estimators {
            for i in 0..n {
                let mu = sigmoid(raw[i]);
                grad[i] = mu - target[i];
                hess[i] = mu * (1.0 - mu);
            }
            let tree = grow_regressor(
                cols,
                n,
                RegressorSpec {
                    max_depth: p.max_depth,
                    min_samples_leaf: p.min_samples_leaf.max(1),
                    l2: p.l2,
                    grad: &grad,
                    hess: &hess,
                },
            );
            for (r, row) in raw.iter_mut().zip(x) {
                *r += p.learning_rate * tree.leaf_value(row)[0];
            }
            trees.push(tree);
        }
        Self {
            prior,
            learning_rate: p.learning_rate,
            trees,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct Gbdt {
    n_classes: usize,
    boosters: Vec<Booster>,
}

impl Gbdt {
    pub fn fit(data: &Encoded<'_>, p: &GbdtParams) -> Self {
        let cols = Columns::new(data.x);
        let targets: Vec<usize> = if data.n_classes == 2 {
            vec![1]
        } else {
            (0..data.n_classes).collect()
        };
        let boosters = targets
            .into_iter()
            .map(|class| {
                let target: Vec<f64> = data.y.iter().map(|&c| f64::from(u8::from(c == class))).collect();
                Booster::fit(&cols, data.x, &target, p)
            })
            .collect();
        Self {
            n_classes: data.n_classes,
            boosters,
        }
    }

    pub fn proba_into(&self, row: &[f64], out: &mut [f64]) {
        if self.n_classes == 2 {
            let p1 = sigmoid(self.boosters[0].raw(row));
            out[0] = 1.0 - p1;
            out[1] = p1;
        } else {
            for (o, b) in out.iter_mut().zip(&self.boosters) {
                *o = sigmoid(b.raw(row));
            }
            normalize_ovr(out);
        }
    }
}
