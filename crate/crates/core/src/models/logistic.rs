//! L2-regularized logistic regression fitted by damped Newton iterations;
//! one-vs-rest beyond two classes.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::params::LogisticParams;
use super::{normalize_ovr, sigmoid, Encoded};

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Binary {
    weights: Vec<f64>,
    intercept: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct Logistic {
    n_classes: usize,
    machines: Vec<Binary>,
    converged: bool,
}

struct Problem<'a> {
    x: &'a [Vec<f64>],
    target: Vec<f64>,
    sample_weight: &'a [f64],
    c: f64,
}

impl Problem<'_> {
    /// Parameters are `[w_1..w_p, b]`; the intercept is not penalized.
    fn objective(&self, theta: &DVector<f64>) -> f64 {
        let p = theta.len() - 1;
        let reg = 0.5 * theta.rows(0, p).norm_squared();
        let data: f64 = self
            .x
            .iter()
            .zip(&self.target)
            .zip(self.sample_weight)
            .map(|((row, &t), &s)| {
                let z = margin(theta, row);
                // log(1 + e^z) - t z
                s * (z.max(0.0) + (-z.abs()).exp().ln_1p() - t * z)
            })
            .sum();
        reg + self.c * data
    }

    fn gradient_and_hessian(&self, theta: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let p = theta.len() - 1;
        let mut grad = DVector::zeros(p + 1);
        let mut hess = DMatrix::zeros(p + 1, p + 1);
        for j in 0..p {
            grad[j] = theta[j];
            hess[(j, j)] = 1.0;
        }
        let mut xi = DVector::zeros(p + 1);
        for ((row, &t), &s) in self.x.iter().zip(&self.target).zip(self.sample_weight) {
            for (j, v) in row.iter().enumerate() {
                xi[j] = *v;
            }
            xi[p] = 1.0;
            let mu = sigmoid(margin(theta, row));
            grad.axpy(self.c * s * (mu - t), &xi, 1.0);
            hess.ger(self.c * s * mu * (1.0 - mu), &xi, &xi, 1.0);
        }
        (grad, hess)
    }
}

fn margin(theta: &DVector<f64>, row: &[f64]) -> f64 {
    let p = row.len();
    row.iter().enumerate().map(|(j, v)| theta[j] * v).sum::<f64>() + theta[p]
}

fn newton(problem: &Problem<'_>, p: usize, params: &LogisticParams) -> (DVector<f64>, bool) {
    let mut theta = DVector::zeros(p + 1);
    let mut f = problem.objective(&theta);
    for _ in 0..params.max_iter {
        let (grad, mut hess) = problem.gradient_and_hessian(&theta);
        if grad.amax() < params.tol {
            return (theta, true);
        }
        // The intercept row has no regularizer; keep the system positive definite.
        hess[(p, p)] += 1e-12;
        let Some(chol) = hess.cholesky() else {
            return (theta, false);
        };
        let direction = -chol.solve(&grad);
        let slope = grad.dot(&direction);
        let mut step = 1.0;
        loop {
            let candidate = &theta + step * &direction;
            let fc = problem.objective(&candidate);
            if fc <= f + 1e-4 * step * slope {
                theta = candidate;
                f = fc;
                break;
            }
            step *= 0.5;
            if step < 1e-12 {
                // No further decrease is representable.
                return (theta, true);
            }
        }
    }
    let (grad, _) = problem.gradient_and_hessian(&theta);
    let done = grad.amax() < params.tol;
    (theta, done)
}

impl Logistic {
    pub fn fit(data: &Encoded<'_>, params: &LogisticParams) -> Self {
        let n = data.x.len();
        let p = data.x.first().map_or(0, Vec::len);
        let mut counts = vec![0usize; data.n_classes];
        data.y.iter().for_each(|&c| counts[c] += 1);
        let sample_weight: Vec<f64> = data
            .y
            .iter()
            .map(|&c| {
                if params.balanced {
                    n as f64 / (data.n_classes as f64 * counts[c] as f64)
                } else {
                    1.0
                }
            })
            .collect();
        let targets: Vec<usize> = if data.n_classes == 2 {
            vec![1]
        } else {
            (0..data.n_classes).collect()
        };
        let mut converged = true;
        let machines = targets
            .into_iter()
            .map(|class| {
                let problem = Problem {
                    x: data.x,
                    target: data.y.iter().map(|&c| f64::from(u8::from(c == class))).collect(),
                    sample_weight: &sample_weight,
                    c: params.c,
                };
                let (theta, ok) = newton(&problem, p, params);
                converged &= ok;
                Binary {
                    weights: theta.rows(0, p).iter().copied().collect(),
                    intercept: theta[p],
                }
            })
            .collect();
        Self {
            n_classes: data.n_classes,
            machines,
            converged,
        }
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn proba_into(&self, row: &[f64], out: &mut [f64]) {
        let prob = |m: &Binary| {
            sigmoid(m.weights.iter().zip(row).map(|(w, x)| w * x).sum::<f64>() + m.intercept)
        };
        if self.n_classes == 2 {
            let p1 = prob(&self.machines[0]);
            out[0] = 1.0 - p1;
            out[1] = p1;
        } else {
            for (o, m) in out.iter_mut().zip(&self.machines) {
                *o = prob(m);
            }
            normalize_ovr(out);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_vanishes_at_solution() {
        let x: Vec<Vec<f64>> = (0..40).map(|i| vec![(i as f64 * 0.7).sin(), (i as f64 * 0.3).cos()]).collect();
        let y: Vec<usize> = x.iter().map(|r| usize::from(r[0] + 0.2 * r[1] > 0.1)).collect();
        let data = Encoded { x: &x, y, n_classes: 2 };
        let model = Logistic::fit(&data, &LogisticParams::default());
        assert!(model.converged());
        let mut out = [0.0; 2];
        model.proba_into(&[1.0, 0.0], &mut out);
        assert!(out[1] > 0.5);
    }
}
