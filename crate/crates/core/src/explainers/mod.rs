//! Global feature importance from exact interventional Shapley values, local
//! linear surrogates, and permutation importance, plus conversion of
//! importance scores to ordinal ranks.

mod lime;
mod permutation;
mod shap;

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

pub use lime::{lime_explain_instance, lime_global};
pub use permutation::permutation_importance;
pub use shap::{shap_global, shap_values, ShapMatrix, EXACT_FEATURE_CAP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XaiMethod {
    Shap,
    Lime,
    /// Accuracy-drop permutation importance, in the style of DALEX.
    Permutation,
}

impl XaiMethod {
    pub const ALL: [XaiMethod; 3] = [XaiMethod::Shap, XaiMethod::Lime, XaiMethod::Permutation];

    pub fn as_str(&self) -> &'static str {
        match self {
            XaiMethod::Shap => "shap",
            XaiMethod::Lime => "lime",
            XaiMethod::Permutation => "permutation",
        }
    }

    /// Column heading used in reports.
    pub fn label(&self) -> &'static str {
        match self {
            XaiMethod::Shap => "SHAP",
            XaiMethod::Lime => "LIME",
            XaiMethod::Permutation => "DALEX",
        }
    }
}

impl fmt::Display for XaiMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for XaiMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "shap" => Ok(XaiMethod::Shap),
            "lime" => Ok(XaiMethod::Lime),
            "permutation" | "dalex" => Ok(XaiMethod::Permutation),
            other => Err(Error::InvalidConfig(format!("unknown explainer {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainerConfig {
    pub background_size: usize,
    /// Instances explained with exact Shapley values (seeded subsample).
    pub shap_instances: usize,
    pub lime_samples_per_instance: usize,
    /// `None` means `0.75 * sqrt(p)`.
    pub lime_kernel_width: Option<f64>,
    pub lime_instances: usize,
    pub permutation_rounds: usize,
    /// Rows scored by permutation importance (seeded subsample).
    pub permutation_rows: usize,
    /// Set by the caller; pipelines derive it from their master seed.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for ExplainerConfig {
    fn default() -> Self {
        Self {
            background_size: 100,
            shap_instances: 2000,
            lime_samples_per_instance: 1000,
            lime_kernel_width: None,
            lime_instances: 2000,
            permutation_rounds: 10,
            permutation_rows: 2000,
            seed: 0,
        }
    }
}

impl ExplainerConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("background_size", self.background_size),
            ("shap_instances", self.shap_instances),
            ("lime_samples_per_instance", self.lime_samples_per_instance),
            ("lime_instances", self.lime_instances),
            ("permutation_rounds", self.permutation_rounds),
            ("permutation_rows", self.permutation_rows),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidConfig(format!("{name} must be positive")));
        }
        if let Some(w) = self.lime_kernel_width {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::InvalidConfig("lime_kernel_width must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn kernel_width(&self, p: usize) -> f64 {
        self.lime_kernel_width.unwrap_or(0.75 * (p as f64).sqrt())
    }
}

/// Up to `size` rows: all of them when there are few enough, otherwise a
/// seeded uniform subsample kept in original order.
pub fn subsample_rows(rows: &[Vec<f64>], size: usize, seed: u64) -> Vec<Vec<f64>> {
    subsample_indices(rows.len(), size, seed)
        .into_iter()
        .map(|i| rows[i].clone())
        .collect()
}

pub fn subsample_indices(n: usize, size: usize, seed: u64) -> Vec<usize> {
    if n <= size {
        return (0..n).collect();
    }
    let mut rng = seed::rng(seed);
    let mut idx = rand::seq::index::sample(&mut rng, n, size).into_vec();
    idx.sort_unstable();
    idx
}

/// Non-negative global importance of each feature for one (model, method).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceVector {
    pub feature_names: Vec<String>,
    pub scores: Vec<f64>,
    pub method: XaiMethod,
    pub model: String,
}

impl ImportanceVector {
    pub fn new(feature_names: Vec<String>, scores: Vec<f64>, method: XaiMethod, model: impl Into<String>) -> Result<Self> {
        if feature_names.len() != scores.len() {
            return Err(Error::WidthMismatch {
                expected: feature_names.len(),
                actual: scores.len(),
            });
        }
        if let Some(bad) = scores.iter().find(|s| !(**s >= 0.0 && s.is_finite())) {
            return Err(Error::Schema(format!("importance score {bad} is not a finite non-negative value")));
        }
        Ok(Self {
            feature_names,
            scores,
            method,
            model: model.into(),
        })
    }

    pub fn ranks(&self) -> RankVector {
        to_ranks(&self.scores)
    }
}

/// Ordinal ranks `1..=p`, rank 1 for the largest score.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankVector(Vec<usize>);

impl RankVector {
    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.0
    }

    /// Feature indices from rank 1 downwards.
    pub fn ordering(&self) -> Vec<usize> {
        let mut order = vec![0; self.0.len()];
        for (j, &r) in self.0.iter().enumerate() {
            order[r - 1] = j;
        }
        order
    }
}

/// Descending-score ordinal ranks; equal scores go to the lower index first.
pub fn to_ranks(scores: &[f64]) -> RankVector {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut ranks = vec![0; scores.len()];
    for (pos, &j) in order.iter().enumerate() {
        ranks[j] = pos + 1;
    }
    RankVector(ranks)
}

/// One row per (vector, feature): `feature,score,rank,method,model`.
pub fn write_importance_csv<W: Write>(out: W, vectors: &[ImportanceVector]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["feature", "score", "rank", "method", "model"])?;
    for v in vectors {
        let ranks = v.ranks();
        for (j, name) in v.feature_names.iter().enumerate() {
            w.write_record([
                name.as_str(),
                &v.scores[j].to_string(),
                &ranks.as_slice()[j].to_string(),
                v.method.as_str(),
                &v.model,
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("<importance csv>", e))?;
    Ok(())
}

/// Index of the model output explained for a model with `n_outputs` columns:
/// the positive class for two classes, otherwise every column.
pub(crate) fn explained_outputs(n_outputs: usize) -> Vec<usize> {
    if n_outputs == 2 {
        vec![1]
    } else {
        (0..n_outputs).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranks_break_ties_by_index() {
        assert_eq!(to_ranks(&[0.5, 0.2, 0.5]).as_slice(), &[1, 3, 2]);
        assert_eq!(to_ranks(&[4.0, 3.0, 2.0, 1.0]).as_slice(), &[1, 2, 3, 4]);
        assert_eq!(to_ranks(&[0.0; 5]).as_slice(), &[1, 2, 3, 4, 5]);
        assert_eq!(to_ranks(&[0.5, 0.2, 0.5]).ordering(), vec![0, 2, 1]);
    }

    #[test]
    fn config_validation() {
        assert!(ExplainerConfig::default().validate().is_ok());
        let bad = ExplainerConfig {
            permutation_rounds: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = ExplainerConfig {
            lime_kernel_width: Some(0.0),
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert!((ExplainerConfig::default().kernel_width(4) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn method_names() {
        assert_eq!("dalex".parse::<XaiMethod>().unwrap(), XaiMethod::Permutation);
        assert_eq!("SHAP".parse::<XaiMethod>().unwrap(), XaiMethod::Shap);
        assert!("anchors".parse::<XaiMethod>().is_err());
    }

    #[test]
    fn subsample_is_sorted_and_seeded() {
        let a = subsample_indices(100, 10, 7);
        assert_eq!(a.len(), 10);
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(a, subsample_indices(100, 10, 7));
        assert_eq!(subsample_indices(5, 10, 7), vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn importance_csv_shape() {
        let v = ImportanceVector::new(vec!["a".into(), "b".into()], vec![0.1, 0.3], XaiMethod::Lime, "RF").unwrap();
        let mut buf = Vec::new();
        write_importance_csv(&mut buf, &[v]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "feature,score,rank,method,model\na,0.1,2,lime,RF\nb,0.3,1,lime,RF\n");
    }
}
