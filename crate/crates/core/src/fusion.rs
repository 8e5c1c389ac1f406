//! Rank aggregation: weighted point scoring (3/2/1 points for first, second,
//! and third place by default) or mean rank, applied across models and then
//! across explanation methods.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explainers::{to_ranks, RankVector, XaiMethod};

/// Features x sources matrix of ordinal ranks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankTable {
    feature_names: Vec<String>,
    sources: Vec<String>,
    /// `ranks[feature][source]`.
    ranks: Vec<Vec<usize>>,
}

/// Checks that `column` is a ranking of `p` items: values in `1..=p` and, once
/// sorted, the i-th smallest value is at most `i`. Shared ranks are allowed.
fn check_column(column: &[usize], name: &str) -> Result<()> {
    let p = column.len();
    let malformed = |reason: String| Error::MalformedRanking {
        column: name.to_string(),
        reason,
    };
    if let Some(&r) = column.iter().find(|&&r| r == 0 || r > p) {
        return Err(malformed(format!("rank {r} outside 1..={p}")));
    }
    let mut sorted = column.to_vec();
    sorted.sort_unstable();
    if let Some((i, &r)) = sorted.iter().enumerate().find(|(i, &r)| r > i + 1) {
        return Err(malformed(format!("{} features share ranks above {r}", i + 1)));
    }
    Ok(())
}

impl RankTable {
    pub fn new(feature_names: Vec<String>, sources: Vec<String>, ranks: Vec<Vec<usize>>) -> Result<Self> {
        if feature_names.is_empty() {
            return Err(Error::EmptyFeatureList);
        }
        if sources.is_empty() {
            return Err(Error::MalformedRanking {
                column: String::new(),
                reason: "rank table has no sources".into(),
            });
        }
        if ranks.len() != feature_names.len() {
            return Err(Error::WidthMismatch {
                expected: feature_names.len(),
                actual: ranks.len(),
            });
        }
        if let Some(bad) = ranks.iter().find(|r| r.len() != sources.len()) {
            return Err(Error::WidthMismatch {
                expected: sources.len(),
                actual: bad.len(),
            });
        }
        let table = Self {
            feature_names,
            sources,
            ranks,
        };
        for s in 0..table.sources.len() {
            check_column(&table.column(s), &table.sources[s])?;
        }
        Ok(table)
    }

    /// One column per rank vector.
    pub fn from_columns(feature_names: Vec<String>, columns: Vec<(String, RankVector)>) -> Result<Self> {
        let p = feature_names.len();
        let (sources, cols): (Vec<String>, Vec<RankVector>) = columns.into_iter().unzip();
        let ranks = (0..p)
            .map(|f| cols.iter().map(|c| c.as_slice().get(f).copied().unwrap_or(0)).collect())
            .collect();
        if let Some(bad) = cols.iter().find(|c| c.as_slice().len() != p) {
            return Err(Error::WidthMismatch {
                expected: p,
                actual: bad.as_slice().len(),
            });
        }
        Self::new(feature_names, sources, ranks)
    }

    /// Reads `feature,<source>,<source>,...` with one row per feature.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let header = reader.headers()?.clone();
        if header.len() < 2 {
            return Err(Error::Schema("rank table needs a feature column and at least one source".into()));
        }
        let sources: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut names = Vec::new();
        let mut ranks = Vec::new();
        for record in reader.records() {
            let record = record?;
            names.push(record[0].to_string());
            let row = record
                .iter()
                .skip(1)
                .map(|cell| {
                    cell.parse::<usize>()
                        .map_err(|_| Error::Schema(format!("rank {cell:?} is not a positive integer")))
                })
                .collect::<Result<Vec<_>>>()?;
            ranks.push(row);
        }
        Self::new(names, sources, ranks)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["feature".to_string()];
        header.extend(self.sources.iter().cloned());
        w.write_record(&header)?;
        for (name, row) in self.feature_names.iter().zip(&self.ranks) {
            let mut record = vec![name.clone()];
            record.extend(row.iter().map(usize::to_string));
            w.write_record(&record)?;
        }
        w.flush().map_err(|e| Error::io("<rank table csv>", e))?;
        Ok(())
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn sources(&self) -> &[String] {
        &self.sources
    }

    pub fn feature_count(&self) -> usize {
        self.feature_names.len()
    }

    pub fn rank(&self, feature: usize, source: usize) -> usize {
        self.ranks[feature][source]
    }

    pub fn column(&self, source: usize) -> Vec<usize> {
        self.ranks.iter().map(|r| r[source]).collect()
    }

    /// Whether source column `s` is a strict permutation of `1..=p`.
    pub fn is_permutation(&self, source: usize) -> bool {
        let mut col = self.column(source);
        col.sort_unstable();
        col.iter().enumerate().all(|(i, &r)| r == i + 1)
    }

    /// The same table with its source columns in `order`.
    pub fn reorder_sources(&self, order: &[usize]) -> Result<Self> {
        let sources = order.iter().map(|&s| self.sources[s].clone()).collect();
        let ranks = self
            .ranks
            .iter()
            .map(|row| order.iter().map(|&s| row[s]).collect())
            .collect();
        Self::new(self.feature_names.clone(), sources, ranks)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionMode {
    WeightedPoints,
    MeanRank,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionSpec {
    /// Points for rank 1, 2, ...; deeper ranks score 0.
    pub points: Vec<f64>,
    pub mode: FusionMode,
    pub top_k: usize,
}

impl Default for FusionSpec {
    fn default() -> Self {
        Self {
            points: vec![3.0, 2.0, 1.0],
            mode: FusionMode::WeightedPoints,
            top_k: 4,
        }
    }
}

impl FusionSpec {
    pub fn with_top_k(top_k: usize) -> Self {
        Self {
            top_k,
            ..Self::default()
        }
    }

    /// Checks the point vector and that `top_k` fits `feature_count`.
    pub fn validate(&self, feature_count: usize) -> Result<()> {
        if self.points.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
            return Err(Error::InvalidConfig("fusion points must be non-negative".into()));
        }
        if self.points.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidConfig("fusion points must be non-increasing".into()));
        }
        if self.top_k == 0 {
            return Err(Error::InvalidConfig("top_k must be positive".into()));
        }
        if self.top_k > feature_count {
            return Err(Error::KTooLarge {
                k: self.top_k,
                features: feature_count,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusedRanking {
    pub feature_names: Vec<String>,
    pub scores: Vec<f64>,
    /// Feature indices by descending score, ties by ascending index.
    pub ordering: Vec<usize>,
    /// Runs of two or more features sharing a score, in ordering order.
    pub tie_groups: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopFeature {
    pub index: usize,
    pub name: String,
    pub score: f64,
    /// Zero score: placed by index order, not by evidence.
    pub flagged: bool,
}

impl FusedRanking {
    pub fn from_scores(feature_names: Vec<String>, scores: Vec<f64>) -> Self {
        let ordering = to_ranks(&scores).ordering();
        let mut tie_groups: Vec<Vec<usize>> = Vec::new();
        let mut run: Vec<usize> = Vec::new();
        for &j in &ordering {
            if run.last().is_some_and(|&prev| scores[prev] != scores[j]) {
                if run.len() > 1 {
                    tie_groups.push(std::mem::take(&mut run));
                }
                run.clear();
            }
            run.push(j);
        }
        if run.len() > 1 {
            tie_groups.push(run);
        }
        Self {
            feature_names,
            scores,
            ordering,
            tie_groups,
        }
    }

    pub fn feature_count(&self) -> usize {
        self.scores.len()
    }

    /// Ordinal rank of each feature (its position in `ordering`, from 1).
    pub fn ranks(&self) -> RankVector {
        to_ranks(&self.scores)
    }

    pub fn ordered_names(&self) -> Vec<&str> {
        self.ordering.iter().map(|&j| self.feature_names[j].as_str()).collect()
    }

    pub fn top_k(&self, k: usize) -> Result<Vec<TopFeature>> {
        top_k(self, k)
    }

    /// `feature,score,rank,flagged`, one row per feature in ranking order.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["feature", "score", "rank", "flagged"])?;
        for (pos, &j) in self.ordering.iter().enumerate() {
            w.write_record([
                self.feature_names[j].as_str(),
                &self.scores[j].to_string(),
                &(pos + 1).to_string(),
                &(self.scores[j] == 0.0).to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<fused csv>", e))?;
        Ok(())
    }
}

/// Fuses the columns of `t` into one score per feature.
pub fn fuse_ranks(t: &RankTable, spec: &FusionSpec) -> Result<FusedRanking> {
    spec.validate(t.feature_count())?;
    let p = t.feature_count();
    let n_sources = t.sources().len() as f64;
    let scores = (0..p)
        .map(|f| match spec.mode {
            FusionMode::WeightedPoints => t.ranks[f]
                .iter()
                .map(|&r| spec.points.get(r - 1).copied().unwrap_or(0.0))
                .sum(),
            FusionMode::MeanRank => {
                let mean = t.ranks[f].iter().sum::<usize>() as f64 / n_sources;
                (p + 1) as f64 - mean
            }
        })
        .collect();
    Ok(FusedRanking::from_scores(t.feature_names.clone(), scores))
}

/// First `k` features of the ranking.
pub fn top_k(f: &FusedRanking, k: usize) -> Result<Vec<TopFeature>> {
    if k > f.feature_count() {
        return Err(Error::KTooLarge {
            k,
            features: f.feature_count(),
        });
    }
    Ok(f.ordering[..k]
        .iter()
        .map(|&j| TopFeature {
            index: j,
            name: f.feature_names[j].clone(),
            score: f.scores[j],
            flagged: f.scores[j] == 0.0,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoLevelFusion {
    pub per_method: BTreeMap<XaiMethod, FusedRanking>,
    /// Level-2 input: one column per method, the ordinal ranking induced by
    /// that method's level-1 result.
    pub method_table: RankTable,
    pub leveled: FusedRanking,
}

impl TwoLevelFusion {
    pub fn leveled_top_k(&self, k: usize) -> Result<Vec<TopFeature>> {
        top_k(&self.leveled, k)
    }
}

/// Fuses each method's table across models, then fuses the induced
/// per-method rankings into the leveled ranking.
pub fn two_level_fuse(tables: &BTreeMap<XaiMethod, RankTable>, spec: &FusionSpec) -> Result<TwoLevelFusion> {
    let Some(first) = tables.values().next() else {
        return Err(Error::MalformedRanking {
            column: String::new(),
            reason: "no rank tables to fuse".into(),
        });
    };
    let names = first.feature_names().to_vec();
    if tables.values().any(|t| t.feature_names() != names.as_slice()) {
        return Err(Error::RosterMismatch);
    }
    let per_method = tables
        .iter()
        .map(|(&m, t)| Ok((m, fuse_ranks(t, spec)?)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    let columns = per_method
        .iter()
        .map(|(m, f)| (m.label().to_string(), f.ranks()))
        .collect();
    let method_table = RankTable::from_columns(names, columns)?;
    let leveled = fuse_ranks(&method_table, spec)?;
    Ok(TwoLevelFusion {
        per_method,
        method_table,
        leveled,
    })
}
