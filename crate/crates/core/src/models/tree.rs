//! CART trees grown on presorted feature columns.
//!
//! Each node owns, per feature, its row ids sorted by that feature's value;
//! splitting a node partitions those lists stably, so no re-sorting happens
//! below the root.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::params::{Criterion, DecisionTreeParams};
use super::Encoded;
use crate::seed;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf(Vec<f64>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf_value(&self, row: &[f64]) -> &[f64] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if row[*feature] <= *threshold { *left } else { *right },
                Node::Leaf(v) => return v,
            }
        }
    }

    #[cfg(test)]
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
                Node::Leaf(_) => 0,
            }
        }
        walk(&self.nodes, 0)
    }
}

/// Feature-major copy of the training matrix.
pub(crate) struct Columns {
    cols: Vec<Vec<f64>>,
}

impl Columns {
    pub fn new(x: &[Vec<f64>]) -> Self {
        let p = x.first().map_or(0, Vec::len);
        Self {
            cols: (0..p).map(|j| x.iter().map(|r| r[j]).collect()).collect(),
        }
    }

    pub fn p(&self) -> usize {
        self.cols.len()
    }

    #[inline]
    pub fn get(&self, j: usize, i: u32) -> f64 {
        self.cols[j][i as usize]
    }
}

struct Presorted {
    by_feature: Vec<Vec<u32>>,
}

impl Presorted {
    fn new(cols: &Columns, rows: &[u32]) -> Self {
        let by_feature = (0..cols.p())
            .map(|j| {
                let mut v = rows.to_vec();
                v.sort_by(|&a, &b| cols.get(j, a).total_cmp(&cols.get(j, b)).then(a.cmp(&b)));
                v
            })
            .collect();
        Self { by_feature }
    }

    fn rows(&self) -> &[u32] {
        &self.by_feature[0]
    }

    fn len(&self) -> usize {
        self.by_feature[0].len()
    }

    fn partition(self, goes_left: &[bool]) -> (Self, Self) {
        let mut left = Vec::with_capacity(self.by_feature.len());
        let mut right = Vec::with_capacity(self.by_feature.len());
        for list in self.by_feature {
            let (l, r): (Vec<u32>, Vec<u32>) = list.into_iter().partition(|&i| goes_left[i as usize]);
            left.push(l);
            right.push(r);
        }
        (Self { by_feature: left }, Self { by_feature: right })
    }
}

#[derive(Clone, Copy)]
struct Candidate {
    feature: usize,
    threshold: f64,
    score: f64,
}

/// Per-node statistics a split criterion accumulates while sweeping a sorted
/// feature list.
trait SplitStats: Clone {
    fn empty(like: &Self) -> Self;
    fn add(&mut self, i: u32);
    fn sub(&mut self, i: u32);
    /// Larger is better; `None` if the partition is not admissible.
    fn score(left: &Self, right: &Self) -> Option<f64>;
}

#[derive(Clone)]
struct ClassStats<'a> {
    y: &'a [usize],
    w: &'a [f64],
    counts: Vec<f64>,
    total: f64,
    criterion: Criterion,
}

impl<'a> ClassStats<'a> {
    fn impurity_weighted(&self) -> f64 {
        // total * impurity
        if self.total <= 0.0 {
            return 0.0;
        }
        match self.criterion {
            Criterion::Gini => self.total - self.counts.iter().map(|c| c * c).sum::<f64>() / self.total,
            Criterion::Entropy => -self
                .counts
                .iter()
                .filter(|&&c| c > 0.0)
                .map(|&c| c * (c / self.total).ln())
                .sum::<f64>(),
        }
    }
}

impl SplitStats for ClassStats<'_> {
    fn empty(like: &Self) -> Self {
        Self {
            counts: vec![0.0; like.counts.len()],
            total: 0.0,
            ..like.clone()
        }
    }

    fn add(&mut self, i: u32) {
        let w = self.w[i as usize];
        self.counts[self.y[i as usize]] += w;
        self.total += w;
    }

    fn sub(&mut self, i: u32) {
        let w = self.w[i as usize];
        self.counts[self.y[i as usize]] -= w;
        self.total -= w;
    }

    fn score(left: &Self, right: &Self) -> Option<f64> {
        Some(-(left.impurity_weighted() + right.impurity_weighted()))
    }
}

#[derive(Clone)]
struct GradStats<'a> {
    g: &'a [f64],
    h: &'a [f64],
    sum_g: f64,
    sum_h: f64,
    l2: f64,
}

const MIN_CHILD_HESSIAN: f64 = 1e-3;

impl GradStats<'_> {
    fn gain_term(&self) -> f64 {
        self.sum_g * self.sum_g / (self.sum_h + self.l2)
    }
}

impl SplitStats for GradStats<'_> {
    fn empty(like: &Self) -> Self {
        Self {
            sum_g: 0.0,
            sum_h: 0.0,
            ..like.clone()
        }
    }

    fn add(&mut self, i: u32) {
        self.sum_g += self.g[i as usize];
        self.sum_h += self.h[i as usize];
    }

    fn sub(&mut self, i: u32) {
        self.sum_g -= self.g[i as usize];
        self.sum_h -= self.h[i as usize];
    }

    fn score(left: &Self, right: &Self) -> Option<f64> {
        if left.sum_h < MIN_CHILD_HESSIAN || right.sum_h < MIN_CHILD_HESSIAN {
            return None;
        }
        Some(left.gain_term() + right.gain_term())
    }
}

/// Best admissible threshold on feature `j` for the rows in `sorted`.
fn best_split_on<S: SplitStats>(
    cols: &Columns,
    j: usize,
    sorted: &[u32],
    parent: &S,
    min_leaf: usize,
) -> Option<Candidate> {
    let n = sorted.len();
    let mut left = S::empty(parent);
    let mut right = parent.clone();
    let mut best: Option<Candidate> = None;
    for pos in 0..n - 1 {
        let i = sorted[pos];
        left.add(i);
        right.sub(i);
        let n_left = pos + 1;
        if n_left < min_leaf || n - n_left < min_leaf {
            continue;
        }
        let here = cols.get(j, i);
        let next = cols.get(j, sorted[pos + 1]);
        if here == next {
            continue;
        }
        if let Some(score) = S::score(&left, &right) {
            if best.is_none_or(|b| score > b.score) {
                let mut threshold = here + (next - here) / 2.0;
                // Midpoint can round up to `next` for adjacent floats.
                if threshold >= next {
                    threshold = here;
                }
                best = Some(Candidate {
                    feature: j,
                    threshold,
                    score,
                });
            }
        }
    }
    best
}

struct GrowConfig {
    max_depth: usize,
    min_samples_split: usize,
    min_samples_leaf: usize,
    max_features: usize,
}

struct Grower<'c, S, L> {
    cols: &'c Columns,
    cfg: GrowConfig,
    stats_of: Box<dyn Fn(&[u32]) -> S + 'c>,
    leaf_of: L,
    /// Extra admissibility test on the winning split (gain threshold).
    accept: Box<dyn Fn(&S, f64) -> bool + 'c>,
    is_pure: Box<dyn Fn(&S) -> bool + 'c>,
    rng: Option<ChaCha8Rng>,
    goes_left: Vec<bool>,
    nodes: Vec<Node>,
}

impl<S: SplitStats, L: Fn(&S) -> Vec<f64>> Grower<'_, S, L> {
    fn grow(&mut self, node: Presorted, depth: usize) -> usize {
        let id = self.nodes.len();
        let stats = (self.stats_of)(node.rows());
        self.nodes.push(Node::Leaf(Vec::new()));
        let n = node.len();
        let splittable = depth < self.cfg.max_depth
            && n >= self.cfg.min_samples_split
            && n >= 2 * self.cfg.min_samples_leaf
            && !(self.is_pure)(&stats);
        let best = if splittable { self.find_split(&node, &stats) } else { None };
        match best {
            Some(c) if (self.accept)(&stats, c.score) => {
                for &i in node.rows() {
                    self.goes_left[i as usize] = self.cols.get(c.feature, i) <= c.threshold;
                }
                let (l, r) = node.partition(&self.goes_left);
                let left = self.grow(l, depth + 1);
                let right = self.grow(r, depth + 1);
                self.nodes[id] = Node::Split {
                    feature: c.feature,
                    threshold: c.threshold,
                    left,
                    right,
                };
            }
            _ => self.nodes[id] = Node::Leaf((self.leaf_of)(&stats)),
        }
        id
    }

    fn find_split(&mut self, node: &Presorted, stats: &S) -> Option<Candidate> {
        let p = self.cols.p();
        let mut order: Vec<usize> = (0..p).collect();
        if let Some(rng) = self.rng.as_mut() {
            order.shuffle(rng);
        }
        let mut best: Option<Candidate> = None;
        for (visited, &j) in order.iter().enumerate() {
            // Past the feature budget, keep looking only until something splits.
            if visited >= self.cfg.max_features && best.is_some() {
                break;
            }
            if let Some(c) =
                best_split_on(self.cols, j, &node.by_feature[j], stats, self.cfg.min_samples_leaf)
            {
                if best.is_none_or(|b| c.score > b.score) {
                    best = Some(c);
                }
            }
        }
        best
    }
}

/// Options for a weighted classification tree.
pub(crate) struct ClassifierSpec<'a> {
    pub params: &'a DecisionTreeParams,
    pub weights: &'a [f64],
    /// Rows to grow on (rows with zero weight should be left out).
    pub rows: Vec<u32>,
    pub rng_seed: Option<u64>,
}

pub(crate) fn grow_classifier(data: &Encoded<'_>, cols: &Columns, spec: ClassifierSpec<'_>) -> Tree {
    let k = data.n_classes;
    let y = &data.y[..];
    let w = spec.weights;
    let criterion = spec.params.criterion;
    let stats_of = move |rows: &[u32]| {
        let mut s = ClassStats {
            y,
            w,
            counts: vec![0.0; k],
            total: 0.0,
            criterion,
        };
        rows.iter().for_each(|&i| s.add(i));
        s
    };
    let p = cols.p();
    let max_features = spec.params.max_features.resolve(p);
    let mut grower = Grower {
        cols,
        cfg: GrowConfig {
            max_depth: spec.params.max_depth,
            min_samples_split: spec.params.min_samples_split.max(2),
            min_samples_leaf: spec.params.min_samples_leaf,
            max_features,
        },
        stats_of: Box::new(stats_of),
        leaf_of: |s: &ClassStats<'_>| {
            if s.total > 0.0 {
                s.counts.iter().map(|c| c / s.total).collect()
            } else {
                vec![1.0 / s.counts.len() as f64; s.counts.len()]
            }
        },
        accept: Box::new(|_, _| true),
        is_pure: Box::new(|s: &ClassStats<'_>| s.counts.iter().filter(|&&c| c > 0.0).count() <= 1),
        rng: spec
            .rng_seed
            .filter(|_| max_features < p)
            .map(seed::rng),
        goes_left: vec![false; data.x.len()],
        nodes: Vec::new(),
    };
    let root = Presorted::new(cols, &spec.rows);
    grower.grow(root, 0);
    Tree {
        nodes: grower.nodes,
    }
}

pub(crate) fn fit_classifier(data: &Encoded<'_>, params: &DecisionTreeParams, seed: u64) -> Tree {
    let cols = Columns::new(data.x);
    let weights = vec![1.0; data.x.len()];
    grow_classifier(
        data,
        &cols,
        ClassifierSpec {
            params,
            weights: &weights,
            rows: (0..data.x.len() as u32).collect(),
            rng_seed: Some(seed),
        },
    )
}

pub(crate) struct RegressorSpec<'a> {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub l2: f64,
    pub grad: &'a [f64],
    pub hess: &'a [f64],
}

/// Newton-step regression tree on per-row gradients and hessians. Leaves hold
/// `-G / (H + l2)`.
pub(crate) fn grow_regressor(cols: &Columns, n_rows: usize, spec: RegressorSpec<'_>) -> Tree {
    let (g, h, l2) = (spec.grad, spec.hess, spec.l2);
    let stats_of = move |rows: &[u32]| {
        let mut s = GradStats {
            g,
            h,
            sum_g: 0.0,
            sum_h: 0.0,
            l2,
        };
        rows.iter().for_each(|&i| s.add(i));
        s
    };
    let mut grower = Grower {
        cols,
        cfg: GrowConfig {
            max_depth: spec.max_depth,
            min_samples_split: 2,
            min_samples_leaf: spec.min_samples_leaf,
            max_features: cols.p(),
        },
        stats_of: Box::new(stats_of),
        leaf_of: |s: &GradStats<'_>| vec![-s.sum_g / (s.sum_h + s.l2).max(1e-12)],
        accept: Box::new(|parent: &GradStats<'_>, score| score - parent.gain_term() > 1e-12),
        is_pure: Box::new(|_| false),
        rng: None,
        goes_left: vec![false; n_rows],
        nodes: Vec::new(),
    };
    grower.grow(Presorted::new(cols, &(0..n_rows as u32).collect::<Vec<_>>()), 0);
    Tree {
        nodes: grower.nodes,
    }
}
