use rand::Rng;
use serde::{Deserialize, Serialize};

use super::params::{DecisionTreeParams, RandomForestParams};
use super::tree::{grow_classifier, ClassifierSpec, Columns, Tree};
use super::Encoded;
use crate::seed;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct Forest {
    trees: Vec<Tree>,
}

impl Forest {
    /// Tree `t` draws its bootstrap and feature subsets from
    /// `derive(seed, t)`, so fitting order does not matter.
    pub fn fit(data: &Encoded<'_>, p: &RandomForestParams, seed: u64) -> Self {
        let cols = Columns::new(data.x);
        let tree_params = DecisionTreeParams {
            criterion: p.criterion,
            max_depth: p.max_depth,
            min_samples_leaf: p.min_samples_leaf,
            min_samples_split: p.min_samples_split,
            max_features: p.max_features,
        };
        let n = data.x.len();
        let fit_one = |t: usize| {
            let tree_seed = seed::derive(seed, &[seed::tag("tree"), t as u64]);
            let mut weights = vec![1.0; n];
            let mut rows: Vec<u32> = (0..n as u32).collect();
            if p.bootstrap {
                let mut rng = seed::rng(seed::derive(tree_seed, &[seed::tag("bootstrap")]));
                weights.iter_mut().for_each(|w| *w = 0.0);
                for _ in 0..n {
                    weights[rng.random_range(0..n)] += 1.0;
                }
                rows.retain(|&i| weights[i as usize] > 0.0);
            }
            grow_classifier(
                data,
                &cols,
                ClassifierSpec {
                    params: &tree_params,
                    weights: &weights,
                    rows,
                    rng_seed: Some(tree_seed),
                },
            )
        };
        #[cfg(feature = "parallel")]
        let trees = {
            use rayon::prelude::*;
            (0..p.n_estimators).into_par_iter().map(fit_one).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let trees = (0..p.n_estimators).map(fit_one).collect();
        Self { trees }
    }

    pub fn proba_into(&self, row: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for tree in &self.trees {
            for (o, v) in out.iter_mut().zip(tree.leaf_value(row)) {
                *o += v;
            }
        }
        let m = self.trees.len() as f64;
        out.iter_mut().for_each(|o| *o /= m);
    }
}
