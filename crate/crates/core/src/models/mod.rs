//! Classifier families behind one interface.
//!
//! [`train`] fits a [`TrainedModel`] from a [`Hyperparameters`] bag; the
//! fitted model answers [`TrainedModel::predict_proba`] with one column per
//! class of its roster (sorted class ids seen during training) and
//! [`TrainedModel::predict`] with the arg-max class, ties going to the lower
//! class id.

mod adaboost;
mod forest;
mod gbdt;
mod knn;
mod logistic;
pub mod mlp;
mod params;
mod svm;
pub(crate) mod tree;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

pub use params::{
    AdaBoostParams, Criterion, DecisionTreeParams, GbdtParams, Hyperparameters, KnnParams,
    LogisticParams, MaxFeatures, MlpParams, RandomForestParams, SvmParams,
};

/// Version written into saved model documents.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GbdtPreset {
    LgbmLike,
    CatboostLike,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ModelFamily {
    DecisionTree,
    RandomForest,
    Knn,
    SvmRbf,
    AdaBoost,
    Mlp,
    LogisticRegression,
    Gbdt(GbdtPreset),
}

impl ModelFamily {
    /// The six families whose explanations are fused.
    pub const EXPLAINED: [ModelFamily; 6] = [
        ModelFamily::DecisionTree,
        ModelFamily::RandomForest,
        ModelFamily::Mlp,
        ModelFamily::Knn,
        ModelFamily::SvmRbf,
        ModelFamily::AdaBoost,
    ];

    /// Classifiers kept out of fusion and used to score fused subsets.
    pub const INDEPENDENT: [ModelFamily; 3] = [
        ModelFamily::Gbdt(GbdtPreset::CatboostLike),
        ModelFamily::Gbdt(GbdtPreset::LgbmLike),
        ModelFamily::LogisticRegression,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ModelFamily::DecisionTree => "decision_tree",
            ModelFamily::RandomForest => "random_forest",
            ModelFamily::Knn => "knn",
            ModelFamily::SvmRbf => "svm_rbf",
            ModelFamily::AdaBoost => "adaboost",
            ModelFamily::Mlp => "mlp",
            ModelFamily::LogisticRegression => "logistic_regression",
            ModelFamily::Gbdt(GbdtPreset::LgbmLike) => "gbdt_lgbm_like",
            ModelFamily::Gbdt(GbdtPreset::CatboostLike) => "gbdt_catboost_like",
        }
    }

    /// Short column label used in rank tables and reports.
    pub fn short_name(&self) -> &'static str {
        match self {
            ModelFamily::DecisionTree => "DT",
            ModelFamily::RandomForest => "RF",
            ModelFamily::Knn => "KNN",
            ModelFamily::SvmRbf => "SVM",
            ModelFamily::AdaBoost => "AdaBoost",
            ModelFamily::Mlp => "DNN",
            ModelFamily::LogisticRegression => "LR",
            ModelFamily::Gbdt(GbdtPreset::LgbmLike) => "LGBM-like",
            ModelFamily::Gbdt(GbdtPreset::CatboostLike) => "CatBoost-like",
        }
    }
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "decision_tree" => ModelFamily::DecisionTree,
            "random_forest" => ModelFamily::RandomForest,
            "knn" => ModelFamily::Knn,
            "svm_rbf" => ModelFamily::SvmRbf,
            "adaboost" => ModelFamily::AdaBoost,
            "mlp" => ModelFamily::Mlp,
            "logistic_regression" => ModelFamily::LogisticRegression,
            "gbdt_lgbm_like" => ModelFamily::Gbdt(GbdtPreset::LgbmLike),
            "gbdt_catboost_like" => ModelFamily::Gbdt(GbdtPreset::CatboostLike),
            other => return Err(Error::InvalidConfig(format!("unknown model family {other:?}"))),
        })
    }
}

impl TryFrom<String> for ModelFamily {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ModelFamily> for String {
    fn from(f: ModelFamily) -> String {
        f.as_str().to_string()
    }
}

/// Anything that maps a feature row to a probability-like output vector.
///
/// Explainers are written against this trait so they work for fitted models
/// and for hand-built test functions alike.
pub trait ProbabilisticModel: Sync {
    fn feature_count(&self) -> usize;

    /// Class id of each output column.
    fn classes(&self) -> &[u32];

    fn proba_into(&self, row: &[f64], out: &mut [f64]);

    fn proba_row(&self, row: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.classes().len()];
        self.proba_into(row, &mut out);
        out
    }

    fn predict_row(&self, row: &[f64]) -> u32 {
        self.classes()[argmax(&self.proba_row(row))]
    }
}

/// Index of the largest value; the first one wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Fitted {
    DecisionTree(tree::Tree),
    RandomForest(forest::Forest),
    Knn(knn::Knn),
    SvmRbf(svm::Svm),
    AdaBoost(adaboost::AdaBoost),
    Mlp(mlp::Mlp),
    LogisticRegression(logistic::Logistic),
    Gbdt(gbdt::Gbdt),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainedModel {
    family: ModelFamily,
    hyperparameters: Hyperparameters,
    classes: Vec<u32>,
    feature_count: usize,
    /// False when an iterative solver hit its cap before converging.
    converged: bool,
    fitted: Fitted,
}

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    version: u32,
    model: TrainedModel,
}

/// Training rows re-expressed with class indices `0..classes.len()`.
pub(crate) struct Encoded<'a> {
    pub x: &'a [Vec<f64>],
    pub y: Vec<usize>,
    pub n_classes: usize,
}

pub fn train(
    family: ModelFamily,
    hp: &Hyperparameters,
    train_set: &Dataset,
    seed: u64,
) -> Result<TrainedModel> {
    if hp.family() != family {
        return Err(Error::HyperparameterMismatch {
            family: family.to_string(),
            hp: hp.family().to_string(),
        });
    }
    hp.validate()?;
    if train_set.is_empty() {
        return Err(Error::EmptyDataset("training set".into()));
    }
    let counts = train_set.class_counts();
    if counts.len() < 2 {
        return Err(Error::SingleClass);
    }
    let classes: Vec<u32> = counts.keys().copied().collect();
    let data = Encoded {
        x: train_set.rows(),
        y: train_set
            .labels()
            .iter()
            .map(|l| classes.binary_search(l).expect("class from counts"))
            .collect(),
        n_classes: classes.len(),
    };
    let mut converged = true;
    let fitted = match hp {
        Hyperparameters::DecisionTree(p) => Fitted::DecisionTree(tree::fit_classifier(&data, p, seed)),
        Hyperparameters::RandomForest(p) => Fitted::RandomForest(forest::Forest::fit(&data, p, seed)),
        Hyperparameters::Knn(p) => Fitted::Knn(knn::Knn::fit(&data, p)),
        Hyperparameters::SvmRbf(p) => {
            let svm = svm::Svm::fit(&data, p);
            converged = svm.converged();
            Fitted::SvmRbf(svm)
        }
        Hyperparameters::AdaBoost(p) => Fitted::AdaBoost(adaboost::AdaBoost::fit(&data, p, seed)),
        Hyperparameters::Mlp(p) => Fitted::Mlp(mlp::Mlp::fit(&data, p, seed)),
        Hyperparameters::LogisticRegression(p) => {
            let lr = logistic::Logistic::fit(&data, p);
            converged = lr.converged();
            Fitted::LogisticRegression(lr)
        }
        Hyperparameters::Gbdt(p) => Fitted::Gbdt(gbdt::Gbdt::fit(&data, p)),
    };
    Ok(TrainedModel {
        family,
        hyperparameters: hp.clone(),
        classes,
        feature_count: train_set.feature_count(),
        converged,
        fitted,
    })
}

impl TrainedModel {
    pub fn family(&self) -> ModelFamily {
        self.family
    }

    pub fn hyperparameters(&self) -> &Hyperparameters {
        &self.hyperparameters
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    fn check_width(&self, rows: &[Vec<f64>]) -> Result<()> {
        match rows.iter().find(|r| r.len() != self.feature_count) {
            Some(bad) => Err(Error::WidthMismatch {
                expected: self.feature_count,
                actual: bad.len(),
            }),
            None => Ok(()),
        }
    }

    pub fn predict_proba(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        self.check_width(rows)?;
        Ok(rows.iter().map(|r| self.proba_row(r)).collect())
    }

    pub fn predict(&self, rows: &[Vec<f64>]) -> Result<Vec<u32>> {
        self.check_width(rows)?;
        Ok(rows.iter().map(|r| self.predict_row(r)).collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&ModelDocument {
            version: MODEL_FORMAT_VERSION,
            model: self.clone(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let version = value
            .get("version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| Error::InvalidConfig("model document has no version".into()))?;
        if version != u64::from(MODEL_FORMAT_VERSION) {
            return Err(Error::ModelVersion(version as u32));
        }
        let doc: ModelDocument = serde_json::from_value(value)?;
        Ok(doc.model)
    }
}

impl ProbabilisticModel for TrainedModel {
    fn feature_count(&self) -> usize {
        self.feature_count
    }

    fn classes(&self) -> &[u32] {
        &self.classes
    }

    fn proba_into(&self, row: &[f64], out: &mut [f64]) {
        match &self.fitted {
            Fitted::DecisionTree(m) => out.copy_from_slice(m.leaf_value(row)),
            Fitted::RandomForest(m) => m.proba_into(row, out),
            Fitted::Knn(m) => m.proba_into(row, out),
            Fitted::SvmRbf(m) => m.proba_into(row, out),
            Fitted::AdaBoost(m) => m.proba_into(row, out),
            Fitted::Mlp(m) => m.proba_into(row, out),
            Fitted::LogisticRegression(m) => m.proba_into(row, out),
            Fitted::Gbdt(m) => m.proba_into(row, out),
        }
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// In-place softmax with max subtraction.
pub(crate) fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

/// Normalizes one-vs-rest scores onto the simplex (uniform if all are zero).
pub(crate) fn normalize_ovr(out: &mut [f64]) {
    let sum: f64 = out.iter().sum();
    if sum > 0.0 && sum.is_finite() {
        out.iter_mut().for_each(|p| *p /= sum);
    } else {
        let u = 1.0 / out.len() as f64;
        out.iter_mut().for_each(|p| *p = u);
    }
}
