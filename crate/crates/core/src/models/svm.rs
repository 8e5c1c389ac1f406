//! RBF support vector classifier: SMO with maximal-violating-pair selection,
//! Platt-scaled probabilities, one-vs-rest for more than two classes.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::params::SvmParams;
use super::{normalize_ovr, Encoded};

#[derive(Debug, Clone, Serialize, Deserialize)]
struct BinarySvm {
    /// `alpha_i * y_i` for each support vector.
    coef: Vec<f64>,
    /// Row-major support vectors.
    support: Vec<f64>,
    bias: f64,
    platt_a: f64,
    platt_b: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct Svm {
    gamma: f64,
    width: usize,
    n_classes: usize,
    machines: Vec<BinarySvm>,
    converged: bool,
}

fn rbf(gamma: f64, a: &[f64], b: &[f64]) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

struct KernelRows<'a> {
    x: &'a [Vec<f64>],
    gamma: f64,
    cache: HashMap<usize, Vec<f64>>,
    capacity: usize,
}

impl<'a> KernelRows<'a> {
    fn new(x: &'a [Vec<f64>], gamma: f64) -> Self {
        const CACHE_BYTES: usize = 64 << 20;
        let capacity = (CACHE_BYTES / (8 * x.len().max(1))).max(2);
        Self {
            x,
            gamma,
            cache: HashMap::new(),
            capacity,
        }
    }

    fn row(&mut self, i: usize) -> Vec<f64> {
        if let Some(r) = self.cache.get(&i) {
            return r.clone();
        }
        let xi = &self.x[i];
        let r: Vec<f64> = self.x.iter().map(|xt| rbf(self.gamma, xi, xt)).collect();
        if self.cache.len() >= self.capacity {
            self.cache.clear();
        }
        self.cache.insert(i, r.clone());
        r
    }
}

struct SmoResult {
    alpha: Vec<f64>,
    bias: f64,
    converged: bool,
}

fn smo(x: &[Vec<f64>], y: &[f64], c: f64, gamma: f64, tol: f64, max_iter: usize) -> SmoResult {
    let n = x.len();
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let mut kernel = KernelRows::new(x, gamma);
    let in_up = |a: f64, y: f64| (y > 0.0 && a < c) || (y < 0.0 && a > 0.0);
    let in_low = |a: f64, y: f64| (y > 0.0 && a > 0.0) || (y < 0.0 && a < c);
    let mut converged = false;
    let (mut m_up, mut m_low) = (0.0, 0.0);
    for _ in 0..max_iter {
        let mut i = usize::MAX;
        let mut j = usize::MAX;
        m_up = f64::NEG_INFINITY;
        m_low = f64::INFINITY;
        for t in 0..n {
            let v = -y[t] * grad[t];
            if in_up(alpha[t], y[t]) && v > m_up {
                m_up = v;
                i = t;
            }
            if in_low(alpha[t], y[t]) && v < m_low {
                m_low = v;
                j = t;
            }
        }
        if i == usize::MAX || j == usize::MAX || m_up - m_low < tol {
            converged = true;
            break;
        }
        let ki = kernel.row(i);
        let kj = kernel.row(j);
        let curvature = (ki[i] + kj[j] - 2.0 * ki[j]).max(1e-12);
        let t_max_i = if y[i] > 0.0 { c - alpha[i] } else { alpha[i] };
        let t_max_j = if y[j] > 0.0 { alpha[j] } else { c - alpha[j] };
        let t = ((m_up - m_low) / curvature).min(t_max_i).min(t_max_j);
        alpha[i] = if t == t_max_i {
            if y[i] > 0.0 { c } else { 0.0 }
        } else {
            (alpha[i] + y[i] * t).clamp(0.0, c)
        };
        alpha[j] = if t == t_max_j {
            if y[j] > 0.0 { 0.0 } else { c }
        } else {
            (alpha[j] - y[j] * t).clamp(0.0, c)
        };
        for s in 0..n {
            grad[s] += y[s] * t * (ki[s] - kj[s]);
        }
    }
    let free: Vec<f64> = (0..n)
        .filter(|&t| alpha[t] > 0.0 && alpha[t] < c)
        .map(|t| -y[t] * grad[t])
        .collect();
    let bias = if free.is_empty() {
        if m_up.is_finite() && m_low.is_finite() {
            (m_up + m_low) / 2.0
        } else {
            0.0
        }
    } else {
        free.iter().sum::<f64>() / free.len() as f64
    };
    SmoResult {
        alpha,
        bias,
        converged,
    }
}

/// Sigmoid fit of decision values to labels (Newton with backtracking on the
/// regularized targets). Returns `(a, b)` with `P(y = 1 | f) = 1 / (1 + exp(a f + b))`.
fn platt(decision: &[f64], positive: &[bool]) -> (f64, f64) {
    let n_pos = positive.iter().filter(|&&p| p).count() as f64;
    let n_neg = positive.len() as f64 - n_pos;
    let hi = (n_pos + 1.0) / (n_pos + 2.0);
    let lo = 1.0 / (n_neg + 2.0);
    let target: Vec<f64> = positive.iter().map(|&p| if p { hi } else { lo }).collect();
    let objective = |a: f64, b: f64| -> f64 {
        decision
            .iter()
            .zip(&target)
            .map(|(&f, &t)| {
                let z = f * a + b;
                if z >= 0.0 {
                    t * z + (-z).exp().ln_1p()
                } else {
                    (t - 1.0) * z + z.exp().ln_1p()
                }
            })
            .sum()
    };
    let (mut a, mut b) = (0.0, ((n_neg + 1.0) / (n_pos + 1.0)).ln());
    let mut fval = objective(a, b);
    for _ in 0..100 {
        let (mut h11, mut h22, mut h21, mut g1, mut g2) = (1e-12, 1e-12, 0.0, 0.0, 0.0);
        for (&f, &t) in decision.iter().zip(&target) {
            let z = f * a + b;
            let (p, q) = if z >= 0.0 {
                let e = (-z).exp();
                (e / (1.0 + e), 1.0 / (1.0 + e))
            } else {
                let e = z.exp();
                (1.0 / (1.0 + e), e / (1.0 + e))
            };
            let d2 = p * q;
            h11 += f * f * d2;
            h22 += d2;
            h21 += f * d2;
            let d1 = t - p;
            g1 += f * d1;
            g2 += d1;
        }
        if g1.abs() < 1e-5 && g2.abs() < 1e-5 {
            break;
        }
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let gd = g1 * da + g2 * db;
        let mut step = 1.0;
        while step >= 1e-10 {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = objective(na, nb);
            if nf < fval + 1e-4 * step * gd {
                a = na;
                b = nb;
                fval = nf;
                break;
            }
            step /= 2.0;
        }
        if step < 1e-10 {
            break;
        }
    }
    (a, b)
}

impl BinarySvm {
    fn decision(&self, gamma: f64, width: usize, row: &[f64]) -> f64 {
        self.support
            .chunks_exact(width)
            .zip(&self.coef)
            .map(|(sv, c)| c * rbf(gamma, sv, row))
            .sum::<f64>()
            + self.bias
    }

    fn probability(&self, gamma: f64, width: usize, row: &[f64]) -> f64 {
        let z = self.platt_a * self.decision(gamma, width, row) + self.platt_b;
        super::sigmoid(-z)
    }
}

impl Svm {
    pub fn fit(data: &Encoded<'_>, p: &SvmParams) -> Self {
        let width = data.x.first().map_or(0, Vec::len);
        let gamma = p.gamma.unwrap_or(1.0 / width.max(1) as f64);
        let n = data.x.len();
        let targets: Vec<usize> = if data.n_classes == 2 {
            vec![1]
        } else {
            (0..data.n_classes).collect()
        };
        let mut converged = true;
        let machines = targets
            .into_iter()
            .map(|class| {
                let positive: Vec<bool> = data.y.iter().map(|&c| c == class).collect();
                let y: Vec<f64> = positive.iter().map(|&p| if p { 1.0 } else { -1.0 }).collect();
                let res = smo(data.x, &y, p.c, gamma, p.tol, p.max_iter_factor * n);
                converged &= res.converged;
                let sv: Vec<usize> = (0..n).filter(|&t| res.alpha[t] > 0.0).collect();
                let mut machine = BinarySvm {
                    coef: sv.iter().map(|&t| res.alpha[t] * y[t]).collect(),
                    support: sv.iter().flat_map(|&t| data.x[t].iter().copied()).collect(),
                    bias: res.bias,
                    platt_a: 0.0,
                    platt_b: 0.0,
                };
                let decision: Vec<f64> =
                    data.x.iter().map(|r| machine.decision(gamma, width, r)).collect();
                let (a, b) = platt(&decision, &positive);
                machine.platt_a = a;
                machine.platt_b = b;
                machine
            })
            .collect();
        Self {
            gamma,
            width,
            n_classes: data.n_classes,
            machines,
            converged,
        }
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn proba_into(&self, row: &[f64], out: &mut [f64]) {
        if self.n_classes == 2 {
            let p1 = self.machines[0].probability(self.gamma, self.width, row);
            out[0] = 1.0 - p1;
            out[1] = p1;
        } else {
            for (o, m) in out.iter_mut().zip(&self.machines) {
                *o = m.probability(self.gamma, self.width, row);
            }
            normalize_ovr(out);
        }
    }
}
