use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use super::ExplainerConfig;
use crate::data::ScalerParams;
use crate::error::{Error, Result};
use crate::models::{argmax, ProbabilisticModel};
use crate::{par, seed};

const RIDGE: f64 = 1e-3;

/// Output column the surrogate fits: the positive class for binary models,
/// the predicted class for multiclass ones.
fn target_output<M: ProbabilisticModel + ?Sized>(model: &M, instance: &[f64]) -> usize {
    match model.classes().len() {
        1 => 0,
        2 => 1,
        _ => argmax(&model.proba_row(instance)),
    }
}

/// Signed local coefficients of a weighted ridge surrogate around `instance`.
///
/// Perturbations are `instance + N(0, sd_j)` per feature; the surrogate is
/// fitted on standardized offsets `(z_j - x_j) / sd_j`, weighted by
/// `exp(-d^2 / width^2)` with `d` the standardized Euclidean distance. The
/// random stream depends only on `(cfg.seed, index)`.
pub fn lime_explain_instance<M: ProbabilisticModel + ?Sized>(
    model: &M,
    instance: &[f64],
    stats: &ScalerParams,
    cfg: &ExplainerConfig,
    index: u64,
) -> Result<Vec<f64>> {
    let p = model.feature_count();
    if instance.len() != p || stats.sd.len() != p {
        return Err(Error::WidthMismatch {
            expected: p,
            actual: if instance.len() != p { instance.len() } else { stats.sd.len() },
        });
    }
    let output = target_output(model, instance);
    let width = cfg.kernel_width(p);
    let mut rng = seed::derived_rng(cfg.seed, &[seed::tag("lime"), index]);
    let dim = p + 1;
    let mut gram = DMatrix::<f64>::zeros(dim, dim);
    let mut rhs = DVector::<f64>::zeros(dim);
    let mut a = DVector::<f64>::zeros(dim);
    let mut z = vec![0.0; p];
    let mut probs = vec![0.0; model.classes().len()];
    a[p] = 1.0;
    for _ in 0..cfg.lime_samples_per_instance {
        let mut d2 = 0.0;
        for j in 0..p {
            let u: f64 = if stats.sd[j] > 0.0 { StandardNormal.sample(&mut rng) } else { 0.0 };
            a[j] = u;
            z[j] = instance[j] + u * stats.sd[j];
            d2 += u * u;
        }
        let w = (-d2 / (width * width)).exp();
        model.proba_into(&z, &mut probs);
        gram.ger(w, &a, &a, 1.0);
        rhs.axpy(w * probs[output], &a, 1.0);
    }
    for j in 0..p {
        gram[(j, j)] += RIDGE;
    }
    let solution = match gram.clone().cholesky() {
        Some(chol) => chol.solve(&rhs),
        None => gram.lu().solve(&rhs).ok_or(Error::SingularSystem)?,
    };
    if solution.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem);
    }
    Ok(solution.rows(0, p).iter().copied().collect())
}

/// Mean absolute local coefficient over the first `cfg.lime_instances` rows.
///
/// Instances whose surrogate cannot be fitted are skipped; more than 10%
/// failures abort.
pub fn lime_global<M: ProbabilisticModel + ?Sized>(
    model: &M,
    rows: &[Vec<f64>],
    stats: &ScalerParams,
    cfg: &ExplainerConfig,
) -> Result<Vec<f64>> {
    if rows.is_empty() {
        return Err(Error::EmptyDataset("no instances to explain".into()));
    }
    let n = cfg.lime_instances.min(rows.len());
    let results = par::map(n, |i| lime_explain_instance(model, &rows[i], stats, cfg, i as u64));
    let mut scores = vec![0.0; model.feature_count()];
    let mut ok = 0usize;
    let mut failed = 0usize;
    for r in results {
        match r {
            Ok(coef) => {
                ok += 1;
                for (s, c) in scores.iter_mut().zip(coef) {
                    *s += c.abs();
                }
            }
            Err(Error::WidthMismatch { expected, actual }) => {
                return Err(Error::WidthMismatch { expected, actual })
            }
            Err(_) => failed += 1,
        }
    }
    if failed * 10 > n || ok == 0 {
        return Err(Error::TooManyFailures { failed, total: n });
    }
    scores.iter_mut().for_each(|s| *s /= ok as f64);
    Ok(scores)
}
