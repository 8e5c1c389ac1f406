//! Published rank tables and result columns shipped with the crate, used as
//! fusion inputs and conformance targets.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explainers::XaiMethod;
use crate::fusion::RankTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setup {
    VeremiBinary,
    VeremiMulticlass,
    SensorBinary,
}

impl Setup {
    pub const ALL: [Setup; 3] = [Setup::VeremiBinary, Setup::VeremiMulticlass, Setup::SensorBinary];

    pub fn as_str(&self) -> &'static str {
        match self {
            Setup::VeremiBinary => "veremi_binary",
            Setup::VeremiMulticlass => "veremi_multiclass",
            Setup::SensorBinary => "sensor_binary",
        }
    }

    /// Number of leading features compared against the published columns.
    pub fn top_k(&self) -> usize {
        match self {
            Setup::SensorBinary => 5,
            _ => 4,
        }
    }
}

impl fmt::Display for Setup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Setup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Setup::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown setup {s:?}")))
    }
}

/// File-name token of a method's rank table.
fn method_token(m: XaiMethod) -> &'static str {
    match m {
        XaiMethod::Shap => "shap",
        XaiMethod::Lime => "lime",
        XaiMethod::Permutation => "dalex",
    }
}

fn embedded_table(setup: Setup, method: XaiMethod) -> &'static str {
    use Setup::*;
    use XaiMethod::*;
    match (setup, method) {
        (VeremiBinary, Shap) => include_str!("../fixtures/veremi_binary_shap.csv"),
        (VeremiBinary, Lime) => include_str!("../fixtures/veremi_binary_lime.csv"),
        (VeremiBinary, Permutation) => include_str!("../fixtures/veremi_binary_dalex.csv"),
        (VeremiMulticlass, Shap) => include_str!("../fixtures/veremi_multiclass_shap.csv"),
        (VeremiMulticlass, Lime) => include_str!("../fixtures/veremi_multiclass_lime.csv"),
        (VeremiMulticlass, Permutation) => include_str!("../fixtures/veremi_multiclass_dalex.csv"),
        (SensorBinary, Shap) => include_str!("../fixtures/sensor_binary_shap.csv"),
        (SensorBinary, Lime) => include_str!("../fixtures/sensor_binary_lime.csv"),
        (SensorBinary, Permutation) => include_str!("../fixtures/sensor_binary_dalex.csv"),
    }
}

const COMBINED_FEATURES: &str = include_str!("../fixtures/combined_features.csv");
const REFERENCE_METRICS: &str = include_str!("../fixtures/reference_metrics.csv");

/// Where fixtures are read from: the copies compiled into the crate, or a
/// directory holding files with the same names.
#[derive(Debug, Clone, Default)]
pub enum FixtureSource {
    #[default]
    Embedded,
    Directory(std::path::PathBuf),
}

impl FixtureSource {
    fn text(&self, file: &str, embedded: &'static str) -> Result<String> {
        match self {
            FixtureSource::Embedded => Ok(embedded.to_string()),
            FixtureSource::Directory(dir) => {
                let path = dir.join(file);
                if !path.is_file() {
                    return Err(Error::MissingFixture(path.display().to_string()));
                }
                std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))
            }
        }
    }

    pub fn rank_table(&self, setup: Setup, method: XaiMethod) -> Result<RankTable> {
        let file = format!("{}_{}.csv", setup.as_str(), method_token(method));
        RankTable::read_csv(self.text(&file, embedded_table(setup, method))?.as_bytes())
    }

    pub fn rank_tables(&self, setup: Setup) -> Result<BTreeMap<XaiMethod, RankTable>> {
        XaiMethod::ALL
            .into_iter()
            .map(|m| Ok((m, self.rank_table(setup, m)?)))
            .collect()
    }

    pub fn published_columns(&self) -> Result<PublishedColumns> {
        let text = self.text("combined_features.csv", COMBINED_FEATURES)?;
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let mut rows: Vec<(Setup, PublishedColumn, usize, String)> = Vec::new();
        for record in reader.records() {
            let r = record?;
            let setup: Setup = r[0].parse()?;
            let column: PublishedColumn = r[1].parse()?;
            let position: usize = r[2]
                .parse()
                .map_err(|_| Error::Schema(format!("bad position {:?}", &r[2])))?;
            rows.push((setup, column, position, r[3].to_string()));
        }
        rows.sort_by(|a, b| (a.0, a.1, a.2).cmp(&(b.0, b.1, b.2)));
        let mut columns: BTreeMap<(Setup, PublishedColumn), Vec<String>> = BTreeMap::new();
        for (setup, column, _, feature) in rows {
            columns.entry((setup, column)).or_default().push(feature);
        }
        Ok(PublishedColumns(columns))
    }

    pub fn reference_metrics(&self) -> Result<Vec<ReferenceMetric>> {
        let text = self.text("reference_metrics.csv", REFERENCE_METRICS)?;
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        reader
            .deserialize()
            .map(|r| r.map_err(Error::from))
            .collect()
    }
}

/// A column of the published top-feature table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PublishedColumn {
    Method(XaiMethod),
    Leveled,
}

impl PublishedColumn {
    pub const ALL: [PublishedColumn; 4] = [
        PublishedColumn::Method(XaiMethod::Shap),
        PublishedColumn::Method(XaiMethod::Lime),
        PublishedColumn::Method(XaiMethod::Permutation),
        PublishedColumn::Leveled,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            PublishedColumn::Method(m) => m.label(),
            PublishedColumn::Leveled => "Leveled",
        }
    }
}

impl fmt::Display for PublishedColumn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PublishedColumn::Method(m) => f.write_str(method_token(*m)),
            PublishedColumn::Leveled => f.write_str("leveled"),
        }
    }
}

impl FromStr for PublishedColumn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "leveled" {
            Ok(PublishedColumn::Leveled)
        } else {
            Ok(PublishedColumn::Method(s.parse()?))
        }
    }
}

/// Published top features per (setup, column), in displayed order.
#[derive(Debug, Clone, PartialEq)]
pub struct PublishedColumns(BTreeMap<(Setup, PublishedColumn), Vec<String>>);

impl PublishedColumns {
    pub fn get(&self, setup: Setup, column: PublishedColumn) -> Option<&[String]> {
        self.0.get(&(setup, column)).map(Vec::as_slice)
    }
}

/// One published metric row for an independent classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceMetric {
    pub setup: Setup,
    pub classifier: String,
    pub metric: String,
    pub shap: f64,
    pub lime: f64,
    pub dalex: f64,
    pub leveled: f64,
}

pub fn rank_tables(setup: Setup) -> Result<BTreeMap<XaiMethod, RankTable>> {
    FixtureSource::Embedded.rank_tables(setup)
}

pub fn published_columns() -> Result<PublishedColumns> {
    FixtureSource::Embedded.published_columns()
}

pub fn reference_metrics() -> Result<Vec<ReferenceMetric>> {
    FixtureSource::Embedded.reference_metrics()
}

/// Writes the embedded fixture files into `dir`.
pub fn export_to(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files: Vec<(String, &str)> = vec![
        ("combined_features.csv".into(), COMBINED_FEATURES),
        ("reference_metrics.csv".into(), REFERENCE_METRICS),
    ];
    for setup in Setup::ALL {
        for m in XaiMethod::ALL {
            files.push((format!("{}_{}.csv", setup.as_str(), method_token(m)), embedded_table(setup, m)));
        }
    }
    for (name, text) in files {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_tables_load() {
        for setup in Setup::ALL {
            let tables = rank_tables(setup).unwrap();
            assert_eq!(tables.len(), 3);
            for t in tables.values() {
                assert_eq!(t.sources(), ["DT", "RF", "DNN", "KNN", "SVM", "AdaBoost"]);
            }
        }
        let dalex = FixtureSource::Embedded
            .rank_table(Setup::VeremiMulticlass, XaiMethod::Permutation)
            .unwrap();
        // Shared ranks in the published KNN, SVM and AdaBoost columns.
        assert_eq!(
            (0..6).map(|s| dalex.is_permutation(s)).collect::<Vec<_>>(),
            vec![true, true, true, false, false, false]
        );
    }

    #[test]
    fn published_columns_and_metrics() {
        let cols = published_columns().unwrap();
        assert_eq!(
            cols.get(Setup::VeremiBinary, PublishedColumn::Leveled).unwrap(),
            ["pos_x", "pos_y", "spd_x", "spd_y"]
        );
        assert_eq!(cols.get(Setup::SensorBinary, PublishedColumn::Method(XaiMethod::Lime)).unwrap().len(), 5);
        let metrics = reference_metrics().unwrap();
        assert_eq!(metrics.len(), 36);
    }

    #[test]
    fn directory_source_reports_missing_files() {
        let dir = tempfile::tempdir().unwrap();
        let src = FixtureSource::Directory(dir.path().to_path_buf());
        assert!(matches!(src.rank_tables(Setup::VeremiBinary), Err(Error::MissingFixture(_))));
        export_to(dir.path()).unwrap();
        assert_eq!(src.rank_tables(Setup::VeremiBinary).unwrap(), rank_tables(Setup::VeremiBinary).unwrap());
    }
}
