use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid schema: {0}")]
    Schema(String),
    #[error("header mismatch: missing columns {missing:?}, unexpected columns {unexpected:?}")]
    HeaderMismatch {
        missing: Vec<String>,
        unexpected: Vec<String>,
    },
    #[error("dataset is empty: {0}")]
    EmptyDataset(String),
    #[error("unknown raw label {0}")]
    UnknownLabel(u32),
    #[error("dataset has a single class; at least two are required")]
    SingleClass,
    #[error("not enough rows: {0}")]
    TooFewRows(String),
    #[error("row width {actual} does not match feature count {expected}")]
    WidthMismatch { expected: usize, actual: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("hyperparameters for {hp} do not match model family {family}")]
    HyperparameterMismatch { family: String, hp: String },
    #[error("exact Shapley enumeration supports at most {cap} features, got {features}")]
    FeatureCap { features: usize, cap: usize },
    #[error("background set is empty")]
    EmptyBackground,
    #[error("weighted least-squares system is singular")]
    SingularSystem,
    #[error("{failed} of {total} local explanations failed")]
    TooManyFailures { failed: usize, total: usize },
    #[error("malformed ranking in column {column}: {reason}")]
    MalformedRanking { column: String, reason: String },
    #[error("feature rosters differ between rank tables")]
    RosterMismatch,
    #[error("k = {k} exceeds feature count {features}")]
    KTooLarge { k: usize, features: usize },
    #[error("feature list is empty")]
    EmptyFeatureList,
    #[error("unknown feature {0}")]
    UnknownFeature(String),
    #[error("label {0} is outside the class roster")]
    LabelOutsideRoster(u32),
    #[error("missing fixture {0}")]
    MissingFixture(String),
    #[error("unsupported model document version {0}")]
    ModelVersion(u32),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
