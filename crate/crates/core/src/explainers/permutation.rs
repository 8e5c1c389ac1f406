use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::models::ProbabilisticModel;
use crate::{par, seed};

fn accuracy<M: ProbabilisticModel + ?Sized>(model: &M, rows: &[Vec<f64>], labels: &[u32]) -> f64 {
    let hits = rows
        .iter()
        .zip(labels)
        .filter(|(r, &y)| model.predict_row(r) == y)
        .count();
    hits as f64 / rows.len() as f64
}

/// Mean accuracy drop when one column is shuffled, clamped at zero.
///
/// Round `r` of feature `j` shuffles with a stream derived from
/// `(seed, j, r)`.
pub fn permutation_importance<M: ProbabilisticModel + ?Sized>(
    model: &M,
    rows: &[Vec<f64>],
    labels: &[u32],
    rounds: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if rows.is_empty() {
        return Err(Error::EmptyDataset("no rows for permutation importance".into()));
    }
    if rows.len() != labels.len() {
        return Err(Error::WidthMismatch {
            expected: rows.len(),
            actual: labels.len(),
        });
    }
    if rounds == 0 {
        return Err(Error::InvalidConfig("permutation_rounds must be positive".into()));
    }
    let p = model.feature_count();
    let baseline = accuracy(model, rows, labels);
    let scores = par::map(p, |j| {
        let column: Vec<f64> = rows.iter().map(|r| r[j]).collect();
        let mut order: Vec<usize> = (0..rows.len()).collect();
        let mut scratch = vec![0.0; p];
        let mut total_drop = 0.0;
        for r in 0..rounds {
            let mut rng = seed::derived_rng(seed, &[seed::tag("permutation"), j as u64, r as u64]);
            order.shuffle(&mut rng);
            let mut hits = 0usize;
            for (i, row) in rows.iter().enumerate() {
                scratch.copy_from_slice(row);
                scratch[j] = column[order[i]];
                if model.predict_row(&scratch) == labels[i] {
                    hits += 1;
                }
            }
            total_drop += baseline - hits as f64 / rows.len() as f64;
        }
        (total_drop / rounds as f64).max(0.0)
    });
    Ok(scores)
}
