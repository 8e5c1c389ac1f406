//! Tabular data: schema, immutable datasets, and the preprocessing chain
//! (clean, label mapping, under-sampling, stratified split with standard
//! scaling), plus a synthetic generator for the ten-sensor table.

mod csvio;
mod sensor;
mod split;

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

pub use csvio::{load_csv, read_csv, write_csv};
pub use sensor::{
    generate_sensor_dataset, violations, SensorGenerator, SensorRange, DEFAULT_PLANTED, SENSOR_FEATURES,
};
pub use split::{split_and_scale, SamplerConfig, ScalerParams, Split};

/// Label stored for rows whose label cell was empty or unparsable.
pub const MISSING_LABEL: u32 = u32::MAX;

/// Raw attacker-type ids of the vehicular misbehavior data.
pub const VEREMI_CLASSES: [u32; 6] = [0, 1, 2, 4, 8, 16];

pub const VEREMI_FEATURES: [&str; 6] = ["pos_x", "pos_y", "pos_z", "spd_x", "spd_y", "spd_z"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    feature_names: Vec<String>,
    label_column: String,
}

impl FeatureSchema {
    pub fn new<S: Into<String>>(
        feature_names: impl IntoIterator<Item = S>,
        label_column: impl Into<String>,
    ) -> Result<Self> {
        let feature_names: Vec<String> = feature_names.into_iter().map(Into::into).collect();
        let label_column = label_column.into();
        if feature_names.is_empty() {
            return Err(Error::Schema("no feature columns".into()));
        }
        let mut seen = HashSet::new();
        for name in &feature_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::Schema(format!("duplicate feature name {name:?}")));
            }
        }
        if seen.contains(label_column.as_str()) {
            return Err(Error::Schema(format!(
                "label column {label_column:?} is also a feature"
            )));
        }
        Ok(Self {
            feature_names,
            label_column,
        })
    }

    /// Position/speed schema of the flattened misbehavior export.
    pub fn veremi() -> Self {
        Self::new(VEREMI_FEATURES, "attackerType").expect("static schema")
    }

    pub fn sensor() -> Self {
        Self::new(SENSOR_FEATURES.iter().map(|f| f.name), "label").expect("static schema")
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn feature_count(&self) -> usize {
        self.feature_names.len()
    }

    pub fn label_column(&self) -> &str {
        &self.label_column
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    /// Resolves feature names to column indices.
    pub fn indices_of<S: AsRef<str>>(&self, names: &[S]) -> Result<Vec<usize>> {
        names
            .iter()
            .map(|n| {
                self.index_of(n.as_ref())
                    .ok_or_else(|| Error::UnknownFeature(n.as_ref().to_string()))
            })
            .collect()
    }

    fn project(&self, columns: &[usize]) -> Self {
        Self {
            feature_names: columns
                .iter()
                .map(|&c| self.feature_names[c].clone())
                .collect(),
            label_column: self.label_column.clone(),
        }
    }
}

/// Binary collapses every anomaly class onto 1; multiclass keeps raw ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelMode {
    Binary,
    Multiclass,
}

/// Immutable feature table with integer class labels.
///
/// Missing cells are stored as `NaN` (and [`MISSING_LABEL`] for labels) until
/// [`clean`] drops the affected rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: FeatureSchema,
    rows: Vec<Vec<f64>>,
    labels: Vec<u32>,
    roster: Vec<u32>,
}

impl Dataset {
    pub fn new(schema: FeatureSchema, rows: Vec<Vec<f64>>, labels: Vec<u32>) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::Schema(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        let p = schema.feature_count();
        if let Some(bad) = rows.iter().find(|r| r.len() != p) {
            return Err(Error::WidthMismatch {
                expected: p,
                actual: bad.len(),
            });
        }
        let roster = present_classes(&labels);
        Ok(Self {
            schema,
            rows,
            labels,
            roster,
        })
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn feature_count(&self) -> usize {
        self.schema.feature_count()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Declared class roster; defaults to the classes present in the labels.
    pub fn roster(&self) -> &[u32] {
        &self.roster
    }

    pub fn class_counts(&self) -> BTreeMap<u32, usize> {
        let mut counts = BTreeMap::new();
        for &l in &self.labels {
            *counts.entry(l).or_insert(0) += 1;
        }
        counts
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    fn row_is_complete(&self, i: usize) -> bool {
        self.labels[i] != MISSING_LABEL && self.rows[i].iter().all(|v| !v.is_nan())
    }

    /// Rows at `indices`, in the given order. The roster is kept.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            schema: self.schema.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            roster: self.roster.clone(),
        }
    }

    /// First `n` rows (or all of them).
    pub fn head(&self, n: usize) -> Self {
        let idx: Vec<usize> = (0..n.min(self.n_rows())).collect();
        self.subset(&idx)
    }

    /// Keeps only `columns`, in the given order.
    pub fn project(&self, columns: &[usize]) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::EmptyFeatureList);
        }
        if let Some(&bad) = columns.iter().find(|&&c| c >= self.feature_count()) {
            return Err(Error::UnknownFeature(format!("column {bad}")));
        }
        Ok(Self {
            schema: self.schema.project(columns),
            rows: self
                .rows
                .iter()
                .map(|r| columns.iter().map(|&c| r[c]).collect())
                .collect(),
            labels: self.labels.clone(),
            roster: self.roster.clone(),
        })
    }

    /// Same rows with new labels (roster recomputed from the labels).
    pub fn with_labels(&self, labels: Vec<u32>) -> Result<Self> {
        Self::new(self.schema.clone(), self.rows.clone(), labels)
    }

    pub(crate) fn with_rows(&self, rows: Vec<Vec<f64>>) -> Self {
        Self {
            schema: self.schema.clone(),
            rows,
            labels: self.labels.clone(),
            roster: self.roster.clone(),
        }
    }

    fn with_roster(mut self, roster: Vec<u32>) -> Self {
        self.roster = roster;
        self
    }
}

fn present_classes(labels: &[u32]) -> Vec<u32> {
    let mut classes: Vec<u32> = labels
        .iter()
        .copied()
        .filter(|&l| l != MISSING_LABEL)
        .collect::<HashSet<_>>()
        .into_iter()
        .collect();
    classes.sort_unstable();
    classes
}

fn row_key(row: &[f64], label: u32) -> (Vec<u64>, u32) {
    // +0.0 and -0.0 compare equal, so they must hash equal.
    let bits = row
        .iter()
        .map(|&v| if v == 0.0 { 0u64 } else { v.to_bits() })
        .collect();
    (bits, label)
}

/// Drops rows with a missing cell and repeated `(row, label)` pairs, keeping
/// the first occurrence and the original order.
pub fn clean(d: &Dataset) -> Result<Dataset> {
    let mut seen = HashSet::with_capacity(d.n_rows());
    let keep: Vec<usize> = (0..d.n_rows())
        .filter(|&i| d.row_is_complete(i) && seen.insert(row_key(&d.rows[i], d.labels[i])))
        .collect();
    if keep.is_empty() {
        return Err(Error::EmptyDataset("every row was removed by cleaning".into()));
    }
    let out = d.subset(&keep);
    let roster = present_classes(&out.labels);
    Ok(out.with_roster(roster))
}

pub fn map_labels(d: &Dataset, mode: LabelMode) -> Result<Dataset> {
    if let Some(&bad) = d.labels.iter().find(|l| !VEREMI_CLASSES.contains(l)) {
        return Err(Error::UnknownLabel(bad));
    }
    let (labels, roster) = match mode {
        LabelMode::Binary => (
            d.labels.iter().map(|&l| u32::from(l != 0)).collect(),
            vec![0, 1],
        ),
        LabelMode::Multiclass => (d.labels.clone(), VEREMI_CLASSES.to_vec()),
    };
    Ok(d.with_labels(labels)?.with_roster(roster))
}

/// Random under-sampling of every class down to the minority count.
pub fn undersample(d: &Dataset, seed: u64) -> Result<Dataset> {
    let counts = d.class_counts();
    if counts.len() < 2 {
        return Err(Error::SingleClass);
    }
    let minority = *counts.values().min().expect("two classes");
    let mut keep = Vec::with_capacity(minority * counts.len());
    for &class in counts.keys() {
        let members: Vec<usize> = (0..d.n_rows()).filter(|&i| d.labels[i] == class).collect();
        if members.len() == minority {
            keep.extend(members);
        } else {
            let mut rng = seed::derived_rng(seed, &[seed::tag("undersample"), u64::from(class)]);
            keep.extend(
                rand::seq::index::sample(&mut rng, members.len(), minority)
                    .into_iter()
                    .map(|k| members[k]),
            );
        }
    }
    keep.sort_unstable();
    Ok(d.subset(&keep))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(rows: Vec<Vec<f64>>, labels: Vec<u32>) -> Dataset {
        let p = rows.first().map_or(2, Vec::len);
        let names: Vec<String> = (0..p).map(|j| format!("f{j}")).collect();
        Dataset::new(FeatureSchema::new(names, "y").unwrap(), rows, labels).unwrap()
    }

    #[test]
    fn schema_rejects_duplicates_and_label_clash() {
        assert!(FeatureSchema::new(["a", "a"], "y").is_err());
        assert!(FeatureSchema::new(["a", "y"], "y").is_err());
        assert_eq!(FeatureSchema::veremi().feature_count(), 6);
        assert_eq!(FeatureSchema::sensor().feature_count(), 10);
    }

    #[test]
    fn clean_drops_duplicates() {
        let d = toy(vec![vec![1.0, 2.0], vec![1.0, 2.0], vec![3.0, 4.0]], vec![0, 0, 1]);
        let c = clean(&d).unwrap();
        assert_eq!(c.rows(), &[vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(c.labels(), &[0, 1]);
    }

    #[test]
    fn clean_keeps_same_row_with_different_label() {
        let d = toy(vec![vec![1.0, 2.0], vec![1.0, 2.0]], vec![0, 1]);
        assert_eq!(clean(&d).unwrap().n_rows(), 2);
    }

    #[test]
    fn clean_drops_missing_cells() {
        let d = toy(
            vec![vec![1.0, 2.0], vec![f64::NAN, 2.0], vec![5.0, 6.0]],
            vec![0, 1, 1],
        );
        let c = clean(&d).unwrap();
        assert_eq!(c.rows(), &[vec![1.0, 2.0], vec![5.0, 6.0]]);
        let d = toy(vec![vec![1.0, 2.0], vec![3.0, 2.0]], vec![MISSING_LABEL, 1]);
        assert_eq!(clean(&d).unwrap().labels(), &[1]);
    }

    #[test]
    fn clean_identity_and_empty_error() {
        let d = toy(vec![vec![1.0, 2.0], vec![3.0, 4.0]], vec![0, 1]);
        assert_eq!(clean(&d).unwrap(), d);
        let d = toy(vec![vec![f64::NAN, 2.0]], vec![0]);
        assert!(matches!(clean(&d), Err(Error::EmptyDataset(_))));
    }

    #[test]
    fn clean_treats_signed_zero_as_equal() {
        let d = toy(vec![vec![0.0, 1.0], vec![-0.0, 1.0]], vec![0, 0]);
        assert_eq!(clean(&d).unwrap().n_rows(), 1);
    }

    #[test]
    fn label_mapping() {
        let d = toy(vec![vec![0.0]; 3], vec![0, 4, 16]);
        let b = map_labels(&d, LabelMode::Binary).unwrap();
        assert_eq!(b.labels(), &[0, 1, 1]);
        assert_eq!(b.roster(), &[0, 1]);
        let m = map_labels(&d, LabelMode::Multiclass).unwrap();
        assert_eq!(m.labels(), &[0, 4, 16]);
        assert_eq!(m.roster(), &VEREMI_CLASSES);
        let bad = toy(vec![vec![0.0]; 2], vec![0, 3]);
        assert!(matches!(
            map_labels(&bad, LabelMode::Binary),
            Err(Error::UnknownLabel(3))
        ));
    }

    #[test]
    fn undersample_equalizes_counts() {
        let rows: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64]).collect();
        let d = toy(rows, vec![0, 0, 0, 0, 1, 1, 2, 2]);
        let u = undersample(&d, 7).unwrap();
        assert_eq!(
            u.class_counts(),
            BTreeMap::from([(0, 2), (1, 2), (2, 2)])
        );
        assert_eq!(undersample(&d, 7).unwrap(), u);
        assert!(u.rows().iter().all(|r| d.rows().contains(r)));
    }

    #[test]
    fn undersample_balanced_is_identity() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
        let labels = (0..20).map(|i| (i % 2) as u32).collect();
        let d = toy(rows, labels);
        assert_eq!(undersample(&d, 1).unwrap(), d);
    }

    #[test]
    fn undersample_single_class_errors() {
        let d = toy(vec![vec![0.0], vec![1.0]], vec![1, 1]);
        assert!(matches!(undersample(&d, 0), Err(Error::SingleClass)));
    }

    #[test]
    fn project_and_index_lookup() {
        let d = toy(vec![vec![1.0, 2.0, 3.0]], vec![0]);
        let p = d.project(&[2, 0]).unwrap();
        assert_eq!(p.rows(), &[vec![3.0, 1.0]]);
        assert_eq!(p.schema().feature_names(), &["f2", "f0"]);
        assert!(d.project(&[]).is_err());
        assert_eq!(d.schema().indices_of(&["f1"]).unwrap(), vec![1]);
        assert!(d.schema().indices_of(&["nope"]).is_err());
    }
}
