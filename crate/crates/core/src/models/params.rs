//! Hyperparameter bags with the tuned defaults for each family.

use serde::{Deserialize, Serialize};

use super::{GbdtPreset, ModelFamily};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Gini,
    Entropy,
}

/// How many features each split considers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    All,
    Sqrt,
}

impl MaxFeatures {
    pub(crate) fn resolve(self, p: usize) -> usize {
        match self {
            MaxFeatures::All => p,
            MaxFeatures::Sqrt => ((p as f64).sqrt().floor() as usize).max(1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecisionTreeParams {
    pub criterion: Criterion,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub min_samples_split: usize,
    pub max_features: MaxFeatures,
}

impl Default for DecisionTreeParams {
    fn default() -> Self {
        Self {
            criterion: Criterion::Gini,
            max_depth: 50,
            min_samples_leaf: 4,
            min_samples_split: 2,
            max_features: MaxFeatures::All,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomForestParams {
    pub n_estimators: usize,
    pub criterion: Criterion,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub min_samples_split: usize,
    pub max_features: MaxFeatures,
    pub bootstrap: bool,
}

impl Default for RandomForestParams {
    fn default() -> Self {
        Self {
            n_estimators: 100,
            criterion: Criterion::Gini,
            max_depth: 50,
            min_samples_leaf: 1,
            min_samples_split: 2,
            max_features: MaxFeatures::Sqrt,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnnParams {
    pub k: usize,
    /// Minkowski exponent.
    pub p: f64,
}

impl Default for KnnParams {
    fn default() -> Self {
        Self { k: 5, p: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SvmParams {
    pub c: f64,
    /// RBF width; `None` means `1 / feature_count`.
    pub gamma: Option<f64>,
    pub tol: f64,
    /// SMO iteration cap as a multiple of the training-set size.
    pub max_iter_factor: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            gamma: None,
            tol: 1e-3,
            max_iter_factor: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaBoostParams {
    pub n_estimators: usize,
    pub learning_rate: f64,
    pub base_max_depth: usize,
    pub base_min_samples_leaf: usize,
    pub base_min_samples_split: usize,
}

impl Default for AdaBoostParams {
    fn default() -> Self {
        Self {
            n_estimators: 200,
            learning_rate: 1.0,
            base_max_depth: 50,
            base_min_samples_leaf: 1,
            base_min_samples_split: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpParams {
    pub hidden: Vec<usize>,
    pub dropout: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for MlpParams {
    fn default() -> Self {
        Self {
            hidden: vec![16],
            dropout: 0.1,
            epochs: 5,
            batch_size: 100,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogisticParams {
    /// Inverse L2 strength.
    pub c: f64,
    pub max_iter: usize,
    pub balanced: bool,
    pub tol: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            max_iter: 1000,
            balanced: true,
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GbdtParams {
    pub preset: GbdtPreset,
    pub n_estimators: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub l2: f64,
}

impl GbdtParams {
    pub fn preset(preset: GbdtPreset) -> Self {
        match preset {
            GbdtPreset::LgbmLike => Self {
                preset,
                n_estimators: 100,
                learning_rate: 0.03,
                max_depth: 10,
                min_samples_leaf: 20,
                l2: 0.0,
            },
            GbdtPreset::CatboostLike => Self {
                preset,
                n_estimators: 200,
                learning_rate: 0.03,
                max_depth: 10,
                min_samples_leaf: 1,
                l2: 3.0,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Hyperparameters {
    DecisionTree(DecisionTreeParams),
    RandomForest(RandomForestParams),
    Knn(KnnParams),
    SvmRbf(SvmParams),
    AdaBoost(AdaBoostParams),
    Mlp(MlpParams),
    LogisticRegression(LogisticParams),
    Gbdt(GbdtParams),
}

impl Hyperparameters {
    pub fn default_for(family: ModelFamily) -> Self {
        match family {
            ModelFamily::DecisionTree => Self::DecisionTree(Default::default()),
            ModelFamily::RandomForest => Self::RandomForest(Default::default()),
            ModelFamily::Knn => Self::Knn(Default::default()),
            ModelFamily::SvmRbf => Self::SvmRbf(Default::default()),
            ModelFamily::AdaBoost => Self::AdaBoost(Default::default()),
            ModelFamily::Mlp => Self::Mlp(Default::default()),
            ModelFamily::LogisticRegression => Self::LogisticRegression(Default::default()),
            ModelFamily::Gbdt(preset) => Self::Gbdt(GbdtParams::preset(preset)),
        }
    }

    pub fn family(&self) -> ModelFamily {
        match self {
            Self::DecisionTree(_) => ModelFamily::DecisionTree,
            Self::RandomForest(_) => ModelFamily::RandomForest,
            Self::Knn(_) => ModelFamily::Knn,
            Self::SvmRbf(_) => ModelFamily::SvmRbf,
            Self::AdaBoost(_) => ModelFamily::AdaBoost,
            Self::Mlp(_) => ModelFamily::Mlp,
            Self::LogisticRegression(_) => ModelFamily::LogisticRegression,
            Self::Gbdt(p) => ModelFamily::Gbdt(p.preset),
        }
    }

    /// Defaults for `family` with the fields of a JSON object overlaid.
    pub fn with_overrides(family: ModelFamily, overrides: &serde_json::Value) -> Result<Self> {
        let mut value = serde_json::to_value(Self::default_for(family))?;
        match overrides {
            serde_json::Value::Null => {}
            serde_json::Value::Object(fields) => {
                let target = value.as_object_mut().expect("struct variant");
                for (k, v) in fields {
                    if k == "family" {
                        return Err(Error::InvalidConfig(
                            "overrides may not change the family".into(),
                        ));
                    }
                    target.insert(k.clone(), v.clone());
                }
            }
            other => {
                return Err(Error::InvalidConfig(format!(
                    "hyperparameter overrides must be an object, got {other}"
                )))
            }
        }
        let hp: Self = serde_json::from_value(value)
            .map_err(|e| Error::InvalidConfig(format!("{family} overrides: {e}")))?;
        hp.validate()?;
        Ok(hp)
    }

    pub fn validate(&self) -> Result<()> {
        fn positive(name: &str, v: usize) -> Result<()> {
            if v == 0 {
                return Err(Error::InvalidConfig(format!("{name} must be positive")));
            }
            Ok(())
        }
        fn rate(name: &str, v: f64, allow_zero: bool) -> Result<()> {
            let ok = if allow_zero { (0.0..=1.0).contains(&v) } else { v > 0.0 && v <= 1.0 };
            if !ok {
                return Err(Error::InvalidConfig(format!("{name} = {v} is out of range")));
            }
            Ok(())
        }
        match self {
            Self::DecisionTree(p) => {
                positive("max_depth", p.max_depth)?;
                positive("min_samples_leaf", p.min_samples_leaf)?;
                positive("min_samples_split", p.min_samples_split)
            }
            Self::RandomForest(p) => {
                positive("n_estimators", p.n_estimators)?;
                positive("max_depth", p.max_depth)?;
                positive("min_samples_leaf", p.min_samples_leaf)?;
                positive("min_samples_split", p.min_samples_split)
            }
            Self::Knn(p) => {
                positive("k", p.k)?;
                if !(p.p >= 1.0) {
                    return Err(Error::InvalidConfig("minkowski p must be >= 1".into()));
                }
                Ok(())
            }
            Self::SvmRbf(p) => {
                positive("max_iter_factor", p.max_iter_factor)?;
                if !(p.c > 0.0) || !(p.tol > 0.0) || p.gamma.is_some_and(|g| !(g > 0.0)) {
                    return Err(Error::InvalidConfig("svm C, tol and gamma must be positive".into()));
                }
                Ok(())
            }
            Self::AdaBoost(p) => {
                positive("n_estimators", p.n_estimators)?;
                positive("base_max_depth", p.base_max_depth)?;
                positive("base_min_samples_leaf", p.base_min_samples_leaf)?;
                rate("learning_rate", p.learning_rate, false)
            }
            Self::Mlp(p) => {
                positive("epochs", p.epochs)?;
                positive("batch_size", p.batch_size)?;
                if p.hidden.is_empty() || p.hidden.contains(&0) {
                    return Err(Error::InvalidConfig("hidden layer sizes must be positive".into()));
                }
                if !(0.0..1.0).contains(&p.dropout) {
                    return Err(Error::InvalidConfig("dropout must lie in [0, 1)".into()));
                }
                rate("learning_rate", p.learning_rate, false)
            }
            Self::LogisticRegression(p) => {
                positive("max_iter", p.max_iter)?;
                if !(p.c > 0.0) {
                    return Err(Error::InvalidConfig("C must be positive".into()));
                }
                Ok(())
            }
            Self::Gbdt(p) => {
                positive("n_estimators", p.n_estimators)?;
                positive("max_depth", p.max_depth)?;
                positive("min_samples_leaf", p.min_samples_leaf)?;
                // Zero is allowed: it pins the model to the class prior.
                rate("learning_rate", p.learning_rate, true)
            }
        }
    }
}
