use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub seed: u64,
    pub train_fraction: f64,
}

impl SamplerConfig {
    pub fn new(seed: u64, train_fraction: f64) -> Result<Self> {
        let cfg = Self {
            seed,
            train_fraction,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "train_fraction must lie in (0, 1), got {}",
                self.train_fraction
            )));
        }
        Ok(())
    }
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            train_fraction: 0.7,
        }
    }
}

/// Per-feature standardization parameters (population standard deviation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    /// Columns with zero variance; these pass through untouched.
    pub constant: Vec<bool>,
}

impl ScalerParams {
    pub fn fit(d: &Dataset) -> Result<Self> {
        if d.is_empty() {
            return Err(Error::EmptyDataset("cannot fit scaler".into()));
        }
        let n = d.n_rows() as f64;
        let p = d.feature_count();
        let mut mean = vec![0.0; p];
        for row in d.rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; p];
        for row in d.rows() {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let sd: Vec<f64> = var.iter().map(|s| (s / n).sqrt()).collect();
        let constant = sd.iter().map(|&s| s == 0.0).collect();
        Ok(Self { mean, sd, constant })
    }

    pub fn has_constant_columns(&self) -> bool {
        self.constant.iter().any(|&c| c)
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, &v)| {
                if self.constant[j] {
                    v
                } else {
                    (v - self.mean[j]) / self.sd[j]
                }
            })
            .collect()
    }

    pub fn transform(&self, d: &Dataset) -> Dataset {
        d.with_rows(d.rows().iter().map(|r| self.transform_row(r)).collect())
    }
}

#[derive(Debug, Clone)]
pub struct Split {
    pub train: Dataset,
    pub test: Dataset,
    pub scaler: ScalerParams,
}

/// Stratified seeded train/test split; the scaler is fit on the train part
/// and applied to both.
pub fn split_and_scale(d: &Dataset, cfg: &SamplerConfig) -> Result<Split> {
    cfg.validate()?;
    if d.n_rows() < 10 {
        return Err(Error::TooFewRows(format!(
            "split needs at least 10 rows, got {}",
            d.n_rows()
        )));
    }
    let mut by_class: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, &l) in d.labels().iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    for (&class, members) in &mut by_class {
        if members.len() < 2 {
            return Err(Error::TooFewRows(format!(
                "class {class} has {} row(s); stratification needs 2",
                members.len()
            )));
        }
        let mut rng = seed::derived_rng(cfg.seed, &[seed::tag("split"), u64::from(class)]);
        members.shuffle(&mut rng);
        let n_train = ((members.len() as f64 * cfg.train_fraction).round() as usize)
            .clamp(1, members.len() - 1);
        train_idx.extend_from_slice(&members[..n_train]);
        test_idx.extend_from_slice(&members[n_train..]);
    }
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    let train_raw = d.subset(&train_idx);
    let test_raw = d.subset(&test_idx);
    let scaler = ScalerParams::fit(&train_raw)?;
    Ok(Split {
        train: scaler.transform(&train_raw),
        test: scaler.transform(&test_raw),
        scaler,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::FeatureSchema;

    fn balanced(n: usize) -> Dataset {
        let schema = FeatureSchema::new(["a", "b"], "y").unwrap();
        let rows = (0..n).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let labels = (0..n).map(|i| (i % 2) as u32).collect();
        Dataset::new(schema, rows, labels).unwrap()
    }

    #[test]
    fn three_point_column_scales_symmetrically() {
        let schema = FeatureSchema::new(["a"], "y").unwrap();
        let d = Dataset::new(schema, vec![vec![1.0], vec![2.0], vec![3.0]], vec![0, 0, 1]).unwrap();
        let s = ScalerParams::fit(&d).unwrap();
        let t = s.transform(&d);
        let col = t.column(0);
        assert!((col[0] + 1.224_744_871_391_589).abs() < 1e-12);
        assert_eq!(col[1], 0.0);
        assert!((col[2] - 1.224_744_871_391_589).abs() < 1e-12);
    }

    #[test]
    fn constant_column_passes_through() {
        let schema = FeatureSchema::new(["a", "c"], "y").unwrap();
        let d = Dataset::new(schema, vec![vec![1.0, 5.0], vec![2.0, 5.0]], vec![0, 1]).unwrap();
        let s = ScalerParams::fit(&d).unwrap();
        assert_eq!(s.constant, vec![false, true]);
        assert!(s.has_constant_columns());
        assert_eq!(s.transform(&d).column(1), vec![5.0, 5.0]);
    }

    #[test]
    fn stratified_seventy_thirty() {
        let split = split_and_scale(&balanced(100), &SamplerConfig::new(3, 0.7).unwrap()).unwrap();
        assert_eq!(split.train.n_rows(), 70);
        assert_eq!(split.test.n_rows(), 30);
        assert_eq!(split.train.class_counts()[&0], 35);
        assert_eq!(split.train.class_counts()[&1], 35);
        assert_eq!(split.test.class_counts()[&0], 15);
        assert_eq!(split.test.class_counts()[&1], 15);
    }

    #[test]
    fn split_is_deterministic() {
        let cfg = SamplerConfig::new(11, 0.7).unwrap();
        let a = split_and_scale(&balanced(50), &cfg).unwrap();
        let b = split_and_scale(&balanced(50), &cfg).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.test, b.test);
        let c = split_and_scale(&balanced(50), &SamplerConfig::new(12, 0.7).unwrap()).unwrap();
        assert_ne!(a.train, c.train);
    }

    #[test]
    fn split_errors() {
        assert!(SamplerConfig::new(0, 1.0).is_err());
        assert!(SamplerConfig::new(0, 0.0).is_err());
        assert!(split_and_scale(&balanced(9), &SamplerConfig::default()).is_err());
        let schema = FeatureSchema::new(["a"], "y").unwrap();
        let rows = (0..12).map(|i| vec![i as f64]).collect();
        let mut labels = vec![0; 12];
        labels[0] = 1;
        let d = Dataset::new(schema, rows, labels).unwrap();
        assert!(matches!(
            split_and_scale(&d, &SamplerConfig::default()),
            Err(Error::TooFewRows(_))
        ));
    }
}
