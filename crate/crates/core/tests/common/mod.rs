//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use featfuse::data::{Dataset, FeatureSchema};
use featfuse::models::ProbabilisticModel;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Weighted place counter: walks every column and awards `points[r - 1]`
/// to the feature at rank `r`.
pub fn place_counter(ranks: &[Vec<usize>], points: &[f64]) -> Vec<f64> {
    let p = ranks.len();
    let m = ranks.first().map_or(0, Vec::len);
    let mut scores = vec![0.0; p];
    for col in 0..m {
        for place in 1..=p {
            for (feature, row) in ranks.iter().enumerate() {
                if row[col] == place && place <= points.len() {
                    scores[feature] += points[place - 1];
                }
            }
        }
    }
    scores
}

/// Orders features by descending score, lower index first on ties, by
/// repeated selection of the best remaining feature.
pub fn selection_order(scores: &[f64]) -> Vec<usize> {
    let mut left: Vec<usize> = (0..scores.len()).collect();
    let mut order = Vec::new();
    while !left.is_empty() {
        let mut best = 0;
        for (pos, &j) in left.iter().enumerate() {
            if scores[j] > scores[left[best]] {
                best = pos;
            }
        }
        order.push(left.remove(best));
    }
    order
}

/// Random table of `m` ordinal rank columns over `p` features, stored
/// `[feature][column]`.
pub fn random_rank_table(rng: &mut ChaCha8Rng, p: usize, m: usize) -> Vec<Vec<usize>> {
    let mut table = vec![vec![0; m]; p];
    for col in 0..m {
        let mut perm: Vec<usize> = (1..=p).collect();
        perm.shuffle(rng);
        for (feature, r) in perm.into_iter().enumerate() {
            table[feature][col] = r;
        }
    }
    table
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for rest in permutations(n - 1) {
        for pos in 0..=rest.len() {
            let mut v = rest.clone();
            v.insert(pos, n - 1);
            out.push(v);
        }
    }
    out
}

/// Shapley values from the permutation definition: the mean over all `p!`
/// orderings of each feature's marginal contribution when it joins the
/// features before it. `value(mask)` is the coalition value.
pub fn permutation_shapley(p: usize, value: impl Fn(u32) -> f64) -> Vec<f64> {
    let orders = permutations(p);
    let mut phi = vec![0.0; p];
    for order in &orders {
        let mut mask = 0u32;
        for &j in order {
            let before = value(mask);
            mask |= 1 << j;
            phi[j] += value(mask) - before;
        }
    }
    phi.iter().map(|v| v / orders.len() as f64).collect()
}

/// Interventional coalition value of `output`: the mean model output over
/// `background` with `x` substituted on the features in `mask`.
pub fn interventional_value<M: ProbabilisticModel>(
    model: &M,
    x: &[f64],
    background: &[Vec<f64>],
    output: usize,
    mask: u32,
) -> f64 {
    let mut total = 0.0;
    for b in background {
        let row: Vec<f64> = (0..x.len())
            .map(|j| if mask >> j & 1 == 1 { x[j] } else { b[j] })
            .collect();
        total += model.proba_row(&row)[output];
    }
    total / background.len() as f64
}

/// Binary toy model: sigmoid of a random polynomial with pairwise and
/// three-way interactions over the features flagged in `active`.
pub struct PolyModel {
    pub p: usize,
    pub linear: Vec<f64>,
    pub pairs: Vec<(usize, usize, f64)>,
    pub triple: Option<(usize, usize, usize, f64)>,
    pub bias: f64,
    classes: [u32; 2],
}

impl PolyModel {
    pub fn random(rng: &mut ChaCha8Rng, p: usize, active: &[bool]) -> Self {
        let on: Vec<usize> = (0..p).filter(|&j| active[j]).collect();
        let linear = (0..p)
            .map(|j| if active[j] { rng.random_range(-2.0..2.0) } else { 0.0 })
            .collect();
        let mut pairs = Vec::new();
        for (a, &i) in on.iter().enumerate() {
            for &j in &on[a + 1..] {
                pairs.push((i, j, rng.random_range(-1.5..1.5)));
            }
        }
        let triple = (on.len() >= 3).then(|| (on[0], on[1], on[2], rng.random_range(-1.0..1.0)));
        Self {
            p,
            linear,
            pairs,
            triple,
            bias: rng.random_range(-0.5..0.5),
            classes: [0, 1],
        }
    }

    fn logit(&self, x: &[f64]) -> f64 {
        let mut z = self.bias;
        for (j, &w) in self.linear.iter().enumerate() {
            if w != 0.0 {
                z += w * x[j];
            }
        }
        for &(i, j, w) in &self.pairs {
            z += w * x[i] * x[j];
        }
        if let Some((a, b, c, w)) = self.triple {
            z += w * x[a] * x[b] * x[c];
        }
        z
    }
}

impl ProbabilisticModel for PolyModel {
    fn feature_count(&self) -> usize {
        self.p
    }

    fn classes(&self) -> &[u32] {
        &self.classes
    }

    fn proba_into(&self, row: &[f64], out: &mut [f64]) {
        let q = 1.0 / (1.0 + (-self.logit(row)).exp());
        out[0] = 1.0 - q;
        out[1] = q;
    }
}

pub fn random_rows(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..p).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect()
}

/// Ten uniform features; the label is 1 exactly when a weighted sum of the
/// three `planted` features exceeds its median.
pub fn planted_dataset(rng: &mut ChaCha8Rng, n: usize, planted: [usize; 3]) -> Dataset {
    let names: Vec<String> = (0..10).map(|j| format!("f{j}")).collect();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..10).map(|_| rng.random_range(0.0..1.0)).collect())
        .collect();
    let weights = [1.0, 0.8, 0.6];
    let labels = rows
        .iter()
        .map(|r| {
            let s: f64 = planted.iter().zip(weights).map(|(&j, w)| w * r[j]).sum();
            u32::from(s > 1.2)
        })
        .collect();
    Dataset::new(FeatureSchema::new(names, "label").unwrap(), rows, labels).unwrap()
}
