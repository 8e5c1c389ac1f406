//! Configuration-driven orchestration: load or generate data, preprocess,
//! train, explain, fuse, evaluate, and write reports.

mod report;

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{
    self, clean, load_csv, map_labels, split_and_scale, undersample, Dataset, FeatureSchema, LabelMode,
    SamplerConfig, ScalerParams, SensorGenerator, SENSOR_FEATURES,
};
use crate::error::Error;
use crate::evaluation::{
    classification_metrics, confusion_matrix, conformance_check, evaluate_feature_subset, Averaging,
    ConformanceReport, MetricsReport,
};
use crate::explainers::{
    lime_global, permutation_importance, shap_global, shap_values, subsample_indices, subsample_rows,
    ExplainerConfig, ImportanceVector, XaiMethod, EXACT_FEATURE_CAP,
};
use crate::fixtures::{FixtureSource, Setup};
use crate::fusion::{two_level_fuse, FusionSpec, RankTable, TwoLevelFusion};
use crate::models::{train, Hyperparameters, ModelFamily, TrainedModel};
use crate::{par, seed};

pub use report::{emit_report, render_summary_markdown, RunManifest, StageTiming, Summary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Config,
    Data,
    Training,
    Explanation,
    Fusion,
    Evaluation,
    Conformance,
    Report,
}

impl Stage {
    /// Process exit code for a failure in this stage.
    pub fn exit_code(&self) -> i32 {
        match self {
            Stage::Config => 2,
            Stage::Data | Stage::Conformance => 3,
            Stage::Training | Stage::Evaluation => 4,
            Stage::Explanation | Stage::Fusion => 5,
            Stage::Report => 1,
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).ok();
        f.write_str(s.as_ref().and_then(|v| v.as_str()).unwrap_or("unknown"))
    }
}

#[derive(Debug, thiserror::Error)]
#[error("[{stage}] {source}")]
pub struct StageError {
    pub stage: Stage,
    #[source]
    pub source: Error,
}

impl StageError {
    pub fn exit_code(&self) -> i32 {
        self.stage.exit_code()
    }
}

trait AtStage<T> {
    fn at(self, stage: Stage) -> Result<T, StageError>;
}

impl<T> AtStage<T> for crate::Result<T> {
    fn at(self, stage: Stage) -> Result<T, StageError> {
        self.map_err(|source| StageError { stage, source })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedSchema {
    Veremi,
    Sensor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SchemaChoice {
    Named(NamedSchema),
    Custom { features: Vec<String>, label: String },
}

impl Default for SchemaChoice {
    fn default() -> Self {
        SchemaChoice::Named(NamedSchema::Veremi)
    }
}

impl SchemaChoice {
    fn resolve(&self) -> crate::Result<FeatureSchema> {
        match self {
            SchemaChoice::Named(NamedSchema::Veremi) => Ok(FeatureSchema::veremi()),
            SchemaChoice::Named(NamedSchema::Sensor) => Ok(FeatureSchema::sensor()),
            SchemaChoice::Custom { features, label } => FeatureSchema::new(features.clone(), label.clone()),
        }
    }
}

fn half() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    Csv {
        path: PathBuf,
        #[serde(default)]
        schema: SchemaChoice,
    },
    SyntheticSensor {
        n: usize,
        #[serde(default = "half")]
        anomaly_fraction: f64,
        /// Sensor names carrying the label signal; `None` uses the default set.
        #[serde(default)]
        planted: Option<Vec<String>>,
    },
    /// Skip training and fuse the shipped rank tables of one setup.
    Fixtures {
        #[serde(default = "default_setup")]
        setup: Setup,
    },
}

fn default_setup() -> Setup {
    Setup::VeremiBinary
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Balancing {
    #[default]
    BalanceThenSplit,
    SplitThenBalance,
    None,
}

/// A model family, optionally with hyperparameter overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelEntry {
    Family(ModelFamily),
    WithOverrides {
        family: ModelFamily,
        #[serde(default)]
        overrides: serde_json::Value,
    },
}

impl ModelEntry {
    pub fn family(&self) -> ModelFamily {
        match self {
            ModelEntry::Family(f) | ModelEntry::WithOverrides { family: f, .. } => *f,
        }
    }

    pub fn hyperparameters(&self) -> crate::Result<Hyperparameters> {
        match self {
            ModelEntry::Family(f) => Ok(Hyperparameters::default_for(*f)),
            ModelEntry::WithOverrides { family, overrides } => Hyperparameters::with_overrides(*family, overrides),
        }
    }
}

fn default_models() -> Vec<ModelEntry> {
    ModelFamily::EXPLAINED.into_iter().map(ModelEntry::Family).collect()
}

fn default_independent() -> Vec<ModelEntry> {
    ModelFamily::INDEPENDENT.into_iter().map(ModelEntry::Family).collect()
}

fn default_explainers() -> Vec<XaiMethod> {
    XaiMethod::ALL.to_vec()
}

fn default_fraction() -> f64 {
    0.7
}

fn default_mode() -> LabelMode {
    LabelMode::Binary
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub dataset: DatasetSource,
    #[serde(default = "default_mode")]
    pub mode: LabelMode,
    #[serde(default)]
    pub balancing: Balancing,
    #[serde(default = "default_fraction")]
    pub train_fraction: f64,
    #[serde(default = "default_models")]
    pub models: Vec<ModelEntry>,
    #[serde(default = "default_explainers")]
    pub explainers: Vec<XaiMethod>,
    #[serde(default)]
    pub explainer: ExplainerConfig,
    #[serde(default)]
    pub fusion: FusionSpec,
    #[serde(default = "default_independent")]
    pub independent: Vec<ModelEntry>,
    /// Compare fused rankings of the shipped tables with the published columns.
    #[serde(default)]
    pub conformance: bool,
    /// Directory with fixture CSVs; the embedded copies are used when absent.
    #[serde(default)]
    pub fixtures_dir: Option<PathBuf>,
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self, StageError> {
        serde_json::from_str(text).map_err(|e| StageError {
            stage: Stage::Config,
            source: Error::InvalidConfig(e.to_string()),
        })
    }

    /// Feature schema implied by the dataset source.
    pub fn schema(&self) -> crate::Result<FeatureSchema> {
        match &self.dataset {
            DatasetSource::Csv { schema, .. } => schema.resolve(),
            DatasetSource::SyntheticSensor { .. } => Ok(FeatureSchema::sensor()),
            DatasetSource::Fixtures { setup } => Ok(match setup {
                Setup::SensorBinary => FeatureSchema::sensor(),
                _ => FeatureSchema::veremi(),
            }),
        }
    }

    pub fn validate(&self) -> crate::Result<()> {
        let schema = self.schema()?;
        let p = schema.feature_count();
        self.fusion.validate(p)?;
        if let DatasetSource::Fixtures { .. } = self.dataset {
            return Ok(());
        }
        SamplerConfig::new(self.seed, self.train_fraction)?;
        if self.models.is_empty() {
            return Err(Error::InvalidConfig("at least one model is required".into()));
        }
        if self.explainers.is_empty() {
            return Err(Error::InvalidConfig("at least one explainer is required".into()));
        }
        self.explainer.validate()?;
        if self.explainers.contains(&XaiMethod::Shap) && p > EXACT_FEATURE_CAP {
            return Err(Error::FeatureCap {
                features: p,
                cap: EXACT_FEATURE_CAP,
            });
        }
        for entry in self.models.iter().chain(&self.independent) {
            entry.hyperparameters()?;
        }
        let mut seen = std::collections::BTreeSet::new();
        for entry in &self.models {
            if !seen.insert(entry.family().short_name()) {
                return Err(Error::InvalidConfig(format!("model {} listed twice", entry.family())));
            }
        }
        if let DatasetSource::SyntheticSensor {
            n,
            anomaly_fraction,
            planted,
        } = &self.dataset
        {
            if self.mode != LabelMode::Binary {
                return Err(Error::InvalidConfig("synthetic sensor data is binary only".into()));
            }
            sensor_generator(*n, *anomaly_fraction, planted.as_deref(), self.seed)?;
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, ignoring the output directory.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.out = None;
        let text = serde_json::to_string(&canonical).expect("config serializes");
        Sha256::digest(text.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Published setup whose reference numbers apply to this run, if any.
    pub fn reference_setup(&self) -> Option<Setup> {
        match (&self.dataset, self.mode) {
            (DatasetSource::Fixtures { setup }, _) => Some(*setup),
            (DatasetSource::SyntheticSensor { .. }, _) => Some(Setup::SensorBinary),
            (DatasetSource::Csv { schema, .. }, mode) => match (schema, mode) {
                (SchemaChoice::Named(NamedSchema::Veremi), LabelMode::Binary) => Some(Setup::VeremiBinary),
                (SchemaChoice::Named(NamedSchema::Veremi), LabelMode::Multiclass) => Some(Setup::VeremiMulticlass),
                (SchemaChoice::Named(NamedSchema::Sensor), LabelMode::Binary) => Some(Setup::SensorBinary),
                _ => None,
            },
        }
    }

    fn fixture_source(&self) -> FixtureSource {
        match &self.fixtures_dir {
            Some(dir) => FixtureSource::Directory(dir.clone()),
            None => FixtureSource::Embedded,
        }
    }
}

pub fn sensor_generator(
    n: usize,
    anomaly_fraction: f64,
    planted: Option<&[String]>,
    seed: u64,
) -> crate::Result<SensorGenerator> {
    let mut generator = SensorGenerator::new(n, anomaly_fraction, seed);
    if let Some(names) = planted {
        let indices = names
            .iter()
            .map(|name| {
                SENSOR_FEATURES
                    .iter()
                    .position(|f| f.name == name)
                    .ok_or_else(|| Error::UnknownFeature(name.clone()))
            })
            .collect::<crate::Result<Vec<_>>>()?;
        generator = generator.with_planted(indices);
    }
    if !(n >= 2 && anomaly_fraction > 0.0 && anomaly_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "synthetic sensor data needs n >= 2 and 0 < anomaly_fraction < 1 (got {n}, {anomaly_fraction})"
        )));
    }
    Ok(generator)
}

/// Everything a run computes, before anything is written.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub config: PipelineConfig,
    pub config_hash: String,
    pub feature_names: Vec<String>,
    /// Planted sensors of a synthetic run.
    pub planted: Option<Vec<String>>,
    pub rank_tables: BTreeMap<XaiMethod, RankTable>,
    pub importances: Vec<ImportanceVector>,
    pub fusion: TwoLevelFusion,
    /// Explained models scored on the test split, by short name.
    pub model_metrics: BTreeMap<String, MetricsReport>,
    /// Independent classifier -> feature set -> metrics.
    pub subset_metrics: BTreeMap<String, BTreeMap<String, MetricsReport>>,
    pub feature_sets: BTreeMap<String, Vec<String>>,
    pub conformance: Option<ConformanceReport>,
    pub timings: Vec<StageTiming>,
    pub warnings: Vec<String>,
}

/// Label of the all-features baseline feature set.
pub const ALL_FEATURES: &str = "All features";

/// Wall-clock stage timings; browsers have no monotonic clock in `std`, so
/// wasm builds record zeros.
struct Timer {
    timings: Vec<StageTiming>,
    #[cfg(not(target_arch = "wasm32"))]
    started: std::time::Instant,
}

impl Timer {
    fn new() -> Self {
        Self {
            timings: Vec::new(),
            #[cfg(not(target_arch = "wasm32"))]
            started: std::time::Instant::now(),
        }
    }

    fn lap(&mut self, stage: &str) {
        #[cfg(not(target_arch = "wasm32"))]
        let seconds = {
            let now = std::time::Instant::now();
            let s = (now - self.started).as_secs_f64();
            self.started = now;
            s
        };
        #[cfg(target_arch = "wasm32")]
        let seconds = 0.0;
        self.timings.push(StageTiming {
            stage: stage.to_string(),
            seconds,
        });
    }
}

fn load_dataset(cfg: &PipelineConfig) -> crate::Result<Dataset> {
    match &cfg.dataset {
        DatasetSource::Csv { path, schema } => load_csv(path, &schema.resolve()?),
        DatasetSource::SyntheticSensor {
            n,
            anomaly_fraction,
            planted,
        } => sensor_generator(*n, *anomaly_fraction, planted.as_deref(), seed::derive(cfg.seed, &[seed::tag("generate")]))?
            .generate(),
        DatasetSource::Fixtures { .. } => unreachable!("fixture runs do not load data"),
    }
}

struct Prepared {
    train: Dataset,
    test: Dataset,
}

fn prepare(cfg: &PipelineConfig, raw: &Dataset) -> crate::Result<Prepared> {
    let cleaned = clean(raw)?;
    let labelled = map_labels(&cleaned, cfg.mode)?;
    let balance_seed = seed::derive(cfg.seed, &[seed::tag("balance")]);
    let sampler = SamplerConfig::new(seed::derive(cfg.seed, &[seed::tag("split")]), cfg.train_fraction)?;
    match cfg.balancing {
        Balancing::BalanceThenSplit => {
            let balanced = undersample(&labelled, balance_seed)?;
            let split = split_and_scale(&balanced, &sampler)?;
            Ok(Prepared {
                train: split.train,
                test: split.test,
            })
        }
        Balancing::SplitThenBalance => {
            let split = split_and_scale(&labelled, &sampler)?;
            Ok(Prepared {
                train: undersample(&split.train, balance_seed)?,
                test: split.test,
            })
        }
        Balancing::None => {
            let split = split_and_scale(&labelled, &sampler)?;
            Ok(Prepared {
                train: split.train,
                test: split.test,
            })
        }
    }
}

fn explain(
    cfg: &PipelineConfig,
    model: &TrainedModel,
    model_index: usize,
    method: XaiMethod,
    prepared: &Prepared,
    stats: &ScalerParams,
) -> crate::Result<Vec<f64>> {
    let ecfg = ExplainerConfig {
        seed: seed::derive(
            cfg.seed,
            &[seed::tag("explain"), model_index as u64, seed::tag(method.as_str())],
        ),
        ..cfg.explainer.clone()
    };
    let instance_seed = seed::derive(cfg.seed, &[seed::tag("instances"), seed::tag(method.as_str())]);
    match method {
        XaiMethod::Shap => {
            let background = subsample_rows(
                prepared.train.rows(),
                ecfg.background_size,
                seed::derive(cfg.seed, &[seed::tag("background")]),
            );
            let instances = subsample_rows(prepared.test.rows(), ecfg.shap_instances, instance_seed);
            Ok(shap_global(&shap_values(model, &instances, &background)?))
        }
        XaiMethod::Lime => {
            let instances = subsample_rows(prepared.test.rows(), ecfg.lime_instances, instance_seed);
            lime_global(model, &instances, stats, &ecfg)
        }
        XaiMethod::Permutation => {
            let idx = subsample_indices(prepared.test.n_rows(), ecfg.permutation_rows, instance_seed);
            let rows = prepared.test.subset(&idx);
            permutation_importance(model, rows.rows(), rows.labels(), ecfg.permutation_rounds, ecfg.seed)
        }
    }
}

fn conformance(cfg: &PipelineConfig) -> crate::Result<ConformanceReport> {
    let source = cfg.fixture_source();
    let spec_for = |setup: Setup| FusionSpec {
        top_k: setup.top_k(),
        ..cfg.fusion.clone()
    };
    let computed = Setup::ALL
        .into_iter()
        .map(|setup| Ok((setup, two_level_fuse(&source.rank_tables(setup)?, &spec_for(setup))?)))
        .collect::<crate::Result<BTreeMap<_, _>>>()?;
    conformance_check(&computed, &source.published_columns()?)
}

/// Runs every stage in memory.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunArtifacts, StageError> {
    cfg.validate().at(Stage::Config)?;
    let mut timer = Timer::new();
    let mut warnings = Vec::new();
    let feature_names = cfg.schema().at(Stage::Config)?.feature_names().to_vec();

    if let DatasetSource::Fixtures { setup } = cfg.dataset {
        let tables = cfg.fixture_source().rank_tables(setup).at(Stage::Data)?;
        let fusion = two_level_fuse(&tables, &cfg.fusion).at(Stage::Fusion)?;
        timer.lap("fusion");
        let report = conformance(cfg).at(Stage::Conformance)?;
        timer.lap("conformance");
        let feature_sets = leveled_sets(&fusion, cfg, &feature_names).at(Stage::Fusion)?;
        return Ok(RunArtifacts {
            config: cfg.clone(),
            config_hash: cfg.hash(),
            feature_names,
            planted: None,
            rank_tables: tables,
            importances: Vec::new(),
            fusion,
            model_metrics: BTreeMap::new(),
            subset_metrics: BTreeMap::new(),
            feature_sets,
            conformance: Some(report),
            timings: timer.timings,
            warnings,
        });
    }

    let raw = load_dataset(cfg).at(Stage::Data)?;
    let prepared = prepare(cfg, &raw).at(Stage::Data)?;
    let stats = ScalerParams::fit(&prepared.train).at(Stage::Data)?;
    timer.lap("data");

    let mut models = Vec::with_capacity(cfg.models.len());
    let mut model_metrics = BTreeMap::new();
    for (i, entry) in cfg.models.iter().enumerate() {
        let hp = entry.hyperparameters().at(Stage::Config)?;
        let family = entry.family();
        let model_seed = seed::derive(cfg.seed, &[seed::tag("train"), seed::tag(family.as_str()), i as u64]);
        let model = train(family, &hp, &prepared.train, model_seed).at(Stage::Training)?;
        if !model.converged() {
            warnings.push(format!("{family}: solver hit its iteration cap before converging"));
        }
        let predictions = model.predict(prepared.test.rows()).at(Stage::Training)?;
        let roster = prepared.test.roster().to_vec();
        let cm = confusion_matrix(prepared.test.labels(), &predictions, &roster).at(Stage::Evaluation)?;
        let metrics = classification_metrics(&cm, Averaging::default_for(&roster)).at(Stage::Evaluation)?;
        model_metrics.insert(family.short_name().to_string(), metrics);
        models.push(model);
    }
    timer.lap("training");

    let mut importances = Vec::new();
    let mut rank_tables = BTreeMap::new();
    for &method in &cfg.explainers {
        let scores = par::map(models.len(), |i| explain(cfg, &models[i], i, method, &prepared, &stats));
        let mut columns = Vec::with_capacity(models.len());
        for (model, scores) in models.iter().zip(scores) {
            let name = model.family().short_name();
            let iv = ImportanceVector::new(feature_names.clone(), scores.at(Stage::Explanation)?, method, name)
                .at(Stage::Explanation)?;
            columns.push((name.to_string(), iv.ranks()));
            importances.push(iv);
        }
        let table = RankTable::from_columns(feature_names.clone(), columns).at(Stage::Fusion)?;
        rank_tables.insert(method, table);
        timer.lap(&format!("explain_{}", method.as_str()));
    }

    let fusion = two_level_fuse(&rank_tables, &cfg.fusion).at(Stage::Fusion)?;
    let feature_sets = leveled_sets(&fusion, cfg, &feature_names).at(Stage::Fusion)?;
    timer.lap("fusion");

    let sets: Vec<(&String, &Vec<String>)> = feature_sets.iter().collect();
    let mut subset_metrics = BTreeMap::new();
    for (c, entry) in cfg.independent.iter().enumerate() {
        let hp = entry.hyperparameters().at(Stage::Config)?;
        let family = entry.family();
        let s = seed::derive(cfg.seed, &[seed::tag("independent"), seed::tag(family.as_str()), c as u64]);
        let results = par::map(sets.len(), |i| {
            evaluate_feature_subset(&prepared.train, &prepared.test, sets[i].1, family, &hp, s)
        });
        let mut per_set = BTreeMap::new();
        for ((label, _), m) in sets.iter().zip(results) {
            per_set.insert((*label).clone(), m.at(Stage::Evaluation)?);
        }
        subset_metrics.insert(family.short_name().to_string(), per_set);
    }
    timer.lap("evaluation");

    let conformance = if cfg.conformance {
        let r = conformance(cfg).at(Stage::Conformance)?;
        timer.lap("conformance");
        Some(r)
    } else {
        None
    };

    let planted = match &cfg.dataset {
        DatasetSource::SyntheticSensor { planted, .. } => Some(planted.clone().unwrap_or_else(|| {
            data::DEFAULT_PLANTED
                .iter()
                .map(|&j| SENSOR_FEATURES[j].name.to_string())
                .collect()
        })),
        _ => None,
    };

    Ok(RunArtifacts {
        config: cfg.clone(),
        config_hash: cfg.hash(),
        feature_names,
        planted,
        rank_tables,
        importances,
        fusion,
        model_metrics,
        subset_metrics,
        feature_sets,
        conformance,
        timings: timer.timings,
        warnings,
    })
}

/// Top-k feature set of each method, the leveled set, and all features.
fn leveled_sets(
    fusion: &TwoLevelFusion,
    cfg: &PipelineConfig,
    feature_names: &[String],
) -> crate::Result<BTreeMap<String, Vec<String>>> {
    let k = cfg.fusion.top_k;
    let names = |top: Vec<crate::fusion::TopFeature>| top.into_iter().map(|t| t.name).collect::<Vec<_>>();
    let mut sets = BTreeMap::new();
    for (method, ranking) in &fusion.per_method {
        sets.insert(method.label().to_string(), names(ranking.top_k(k)?));
    }
    sets.insert("Leveled".to_string(), names(fusion.leveled_top_k(k)?));
    sets.insert(ALL_FEATURES.to_string(), feature_names.to_vec());
    Ok(sets)
}

/// Default configuration for a synthetic sensor run.
pub fn synthetic_sensor_config(n: usize, seed: u64) -> PipelineConfig {
    PipelineConfig {
        dataset: DatasetSource::SyntheticSensor {
            n,
            anomaly_fraction: 0.5,
            planted: None,
        },
        mode: LabelMode::Binary,
        balancing: Balancing::default(),
        train_fraction: 0.7,
        models: default_models(),
        explainers: default_explainers(),
        explainer: ExplainerConfig::default(),
        fusion: FusionSpec::with_top_k(5),
        independent: default_independent(),
        conformance: false,
        fixtures_dir: None,
        seed,
        out: None,
    }
}
