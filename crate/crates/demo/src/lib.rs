//! Browser demo: fuse rank tables, play with exact Shapley values on a toy
//! model, and compare the three explainers on synthetic sensor data.
//!
//! Each operation has a plain Rust entry point returning JSON (used by the
//! native tests) and a `wasm_bindgen` wrapper for the page.

use std::collections::BTreeMap;

use featfuse::data::SENSOR_FEATURES;
use featfuse::explainers::{shap_values, ExplainerConfig, ShapMatrix, XaiMethod};
use featfuse::fixtures::{rank_tables, Setup};
use featfuse::fusion::{two_level_fuse, FusedRanking, FusionMode, FusionSpec, RankTable, TwoLevelFusion};
use featfuse::models::{ModelFamily, ProbabilisticModel};
use featfuse::pipeline::{run_pipeline, DatasetSource, ModelEntry, PipelineConfig};
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

#[derive(Debug, Serialize)]
pub struct RankedRow {
    pub feature: String,
    pub score: f64,
    pub rank: usize,
    pub flagged: bool,
}

#[derive(Debug, Serialize)]
pub struct RankingView {
    pub label: String,
    pub rows: Vec<RankedRow>,
    pub top: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct FusionView {
    pub methods: Vec<RankingView>,
    pub leveled: RankingView,
}

fn ranking_view(label: &str, f: &FusedRanking, k: usize) -> Result<RankingView, String> {
    let ranks = f.ranks();
    let rows = f
        .ordering
        .iter()
        .map(|&j| RankedRow {
            feature: f.feature_names[j].clone(),
            score: f.scores[j],
            rank: ranks.as_slice()[j],
            flagged: f.scores[j] == 0.0,
        })
        .collect();
    let top = f.top_k(k).map_err(|e| e.to_string())?.into_iter().map(|t| t.name).collect();
    Ok(RankingView {
        label: label.to_string(),
        rows,
        top,
    })
}

fn fusion_view(f: &TwoLevelFusion, k: usize) -> Result<FusionView, String> {
    Ok(FusionView {
        methods: f
            .per_method
            .iter()
            .map(|(m, r)| ranking_view(m.label(), r, k))
            .collect::<Result<_, _>>()?,
        leveled: ranking_view("Leveled", &f.leveled, k)?,
    })
}

fn parse_spec(k: usize, points: &str, mode: &str) -> Result<FusionSpec, String> {
    let points = points
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|e| format!("point {s:?}: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    let mode = match mode {
        "weighted_points" | "" => FusionMode::WeightedPoints,
        "mean_rank" => FusionMode::MeanRank,
        other => return Err(format!("unknown fusion mode {other:?}")),
    };
    Ok(FusionSpec { points, mode, top_k: k })
}

fn to_json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

fn fuse(tables: &BTreeMap<XaiMethod, RankTable>, spec: &FusionSpec) -> Result<String, String> {
    let p = tables.values().next().map_or(0, RankTable::feature_count);
    spec.validate(p).map_err(|e| e.to_string())?;
    let fused = two_level_fuse(tables, spec).map_err(|e| e.to_string())?;
    to_json(&fusion_view(&fused, spec.top_k)?)
}

/// Fuses the shipped tables of `setup` (e.g. `veremi_binary`).
pub fn fuse_fixture_json(setup: &str, k: usize, points: &str, mode: &str) -> Result<String, String> {
    let setup: Setup = setup.parse().map_err(|e: featfuse::Error| e.to_string())?;
    let tables = rank_tables(setup).map_err(|e| e.to_string())?;
    fuse(&tables, &parse_spec(k, points, mode)?)
}

/// Fuses user rank-table CSVs; empty inputs are skipped.
pub fn fuse_tables_json(
    shap_csv: &str,
    lime_csv: &str,
    dalex_csv: &str,
    k: usize,
    points: &str,
    mode: &str,
) -> Result<String, String> {
    let mut tables = BTreeMap::new();
    for (method, text) in [(XaiMethod::Shap, shap_csv), (XaiMethod::Lime, lime_csv), (XaiMethod::Permutation, dalex_csv)] {
        if !text.trim().is_empty() {
            let t = RankTable::read_csv(text.as_bytes()).map_err(|e| format!("{}: {e}", method.label()))?;
            tables.insert(method, t);
        }
    }
    if tables.is_empty() {
        return Err("paste at least one rank table".into());
    }
    fuse(&tables, &parse_spec(k, points, mode)?)
}

/// Logistic toy model `sigmoid(bias + w.x + interaction * x0 * x1)`.
#[derive(Debug, Clone, Deserialize)]
pub struct ToyModel {
    pub weights: Vec<f64>,
    #[serde(default)]
    pub interaction: f64,
    #[serde(default)]
    pub bias: f64,
}

impl ProbabilisticModel for ToyModel {
    fn feature_count(&self) -> usize {
        self.weights.len()
    }

    fn classes(&self) -> &[u32] {
        &[0, 1]
    }

    fn proba_into(&self, row: &[f64], out: &mut [f64]) {
        let mut z = self.bias + self.weights.iter().zip(row).map(|(w, x)| w * x).sum::<f64>();
        if row.len() >= 2 {
            z += self.interaction * row[0] * row[1];
        }
        let q = 1.0 / (1.0 + (-z).exp());
        out[0] = 1.0 - q;
        out[1] = q;
    }
}

#[derive(Debug, Deserialize)]
pub struct PlaygroundInput {
    pub model: ToyModel,
    pub instance: Vec<f64>,
    pub background: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize)]
pub struct PlaygroundOutput {
    pub phi: Vec<f64>,
    pub base_value: f64,
    pub output: f64,
    pub efficiency_error: f64,
    pub coalitions: usize,
}

/// Exact Shapley values of the toy model's positive-class probability.
pub fn shapley_playground_json(input: &str) -> Result<String, String> {
    let input: PlaygroundInput = serde_json::from_str(input).map_err(|e| e.to_string())?;
    if input.model.weights.is_empty() || input.model.weights.len() > 8 {
        return Err("use between 1 and 8 features".into());
    }
    let sm: ShapMatrix = shap_values(&input.model, &[input.instance], &input.background).map_err(|e| e.to_string())?;
    to_json(&PlaygroundOutput {
        phi: sm.phi(0, 0).to_vec(),
        base_value: sm.base_value(0),
        output: sm.output(0, 0),
        efficiency_error: sm.max_efficiency_error(),
        coalitions: 1 << sm.n_features(),
    })
}

#[derive(Debug, Serialize)]
pub struct MethodScores {
    pub label: String,
    pub scores: Vec<f64>,
    pub ranks: Vec<usize>,
}

#[derive(Debug, Serialize)]
pub struct ComparisonOutput {
    pub feature_names: Vec<String>,
    pub planted: Vec<String>,
    pub accuracy: f64,
    pub methods: Vec<MethodScores>,
    pub fusion: FusionView,
}

/// Trains one model on synthetic sensor data and explains it three ways.
pub fn compare_explainers_json(n: usize, seed: u64, planted: &str, family: &str, k: usize) -> Result<String, String> {
    if !(100..=5000).contains(&n) {
        return Err("n must lie in 100..=5000".into());
    }
    let family: ModelFamily = family.parse().map_err(|e: featfuse::Error| e.to_string())?;
    let planted: Vec<String> = planted.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect();
    let overrides = match family {
        ModelFamily::RandomForest => serde_json::json!({"n_estimators": 25}),
        ModelFamily::Mlp => serde_json::json!({"epochs": 30}),
        _ => serde_json::Value::Null,
    };
    let cfg = PipelineConfig {
        dataset: DatasetSource::SyntheticSensor {
            n,
            anomaly_fraction: 0.5,
            planted: (!planted.is_empty()).then_some(planted),
        },
        models: vec![ModelEntry::WithOverrides { family, overrides }],
        independent: Vec::new(),
        explainer: ExplainerConfig {
            background_size: 10,
            shap_instances: 10,
            lime_instances: 20,
            lime_samples_per_instance: 300,
            permutation_rounds: 3,
            permutation_rows: 300,
            ..ExplainerConfig::default()
        },
        fusion: FusionSpec::with_top_k(k),
        ..featfuse::pipeline::synthetic_sensor_config(n, seed)
    };
    let run = run_pipeline(&cfg).map_err(|e| e.to_string())?;
    let methods = run
        .importances
        .iter()
        .map(|iv| MethodScores {
            label: iv.method.label().to_string(),
            scores: iv.scores.clone(),
            ranks: iv.ranks().into_vec(),
        })
        .collect();
    to_json(&ComparisonOutput {
        feature_names: run.feature_names.clone(),
        planted: run.planted.clone().unwrap_or_default(),
        accuracy: run.model_metrics.values().next().map_or(0.0, |m| m.accuracy),
        methods,
        fusion: fusion_view(&run.fusion, k)?,
    })
}

/// Names of the ten synthetic sensors, in column order.
pub fn sensor_names_json() -> String {
    serde_json::to_string(&SENSOR_FEATURES.iter().map(|f| f.name).collect::<Vec<_>>()).expect("names serialize")
}

fn js(r: Result<String, String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = fuseFixture)]
pub fn fuse_fixture(setup: &str, k: usize, points: &str, mode: &str) -> Result<String, JsError> {
    js(fuse_fixture_json(setup, k, points, mode))
}

#[wasm_bindgen(js_name = fuseTables)]
pub fn fuse_tables(shap: &str, lime: &str, dalex: &str, k: usize, points: &str, mode: &str) -> Result<String, JsError> {
    js(fuse_tables_json(shap, lime, dalex, k, points, mode))
}

#[wasm_bindgen(js_name = shapleyPlayground)]
pub fn shapley_playground(input: &str) -> Result<String, JsError> {
    js(shapley_playground_json(input))
}

#[wasm_bindgen(js_name = compareExplainers)]
pub fn compare_explainers(n: usize, seed: u32, planted: &str, family: &str, k: usize) -> Result<String, JsError> {
    js(compare_explainers_json(n, u64::from(seed), planted, family, k))
}

#[wasm_bindgen(js_name = sensorNames)]
pub fn sensor_names() -> String {
    sensor_names_json()
}
