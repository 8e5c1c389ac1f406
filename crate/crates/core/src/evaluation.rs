//! Classification metrics, evaluation of feature subsets on independent
//! classifiers, and conformance of fused rankings against published columns.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::explainers::XaiMethod;
use crate::fixtures::{PublishedColumn, PublishedColumns, Setup};
use crate::fusion::TwoLevelFusion;
use crate::models::{train, Hyperparameters, ModelFamily};

/// Rows are true classes, columns predicted classes, both in roster order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    roster: Vec<u32>,
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn from_counts(roster: Vec<u32>, counts: Vec<Vec<u64>>) -> Result<Self> {
        let k = roster.len();
        if k == 0 || counts.len() != k || counts.iter().any(|r| r.len() != k) {
            return Err(Error::Schema("confusion matrix must be square over the roster".into()));
        }
        Ok(Self { roster, counts })
    }

    pub fn roster(&self) -> &[u32] {
        &self.roster
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.roster.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        self.trace() as f64 / self.total() as f64
    }
}

pub fn confusion_matrix(y_true: &[u32], y_pred: &[u32], roster: &[u32]) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::WidthMismatch {
            expected: y_true.len(),
            actual: y_pred.len(),
        });
    }
    if y_true.is_empty() {
        return Err(Error::EmptyDataset("no predictions to score".into()));
    }
    if roster.is_empty() {
        return Err(Error::Schema("empty class roster".into()));
    }
    let index = |l: u32| roster.iter().position(|&c| c == l).ok_or(Error::LabelOutsideRoster(l));
    let k = roster.len();
    let mut counts = vec![vec![0u64; k]; k];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        counts[index(t)?][index(p)?] += 1;
    }
    ConfusionMatrix::from_counts(roster.to_vec(), counts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "convention", content = "class")]
pub enum Averaging {
    PositiveClass(u32),
    Macro,
    Micro,
}

impl Averaging {
    /// Positive class = the larger id for two classes; macro otherwise.
    pub fn default_for(roster: &[u32]) -> Self {
        match roster {
            [_, positive] => Averaging::PositiveClass(*positive),
            _ => Averaging::Macro,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: u32,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
    /// Nothing was predicted as this class; precision reported as 0.
    pub precision_undefined: bool,
    /// The class never occurs; recall reported as 0.
    pub recall_undefined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub convention: Averaging,
    pub per_class: Vec<ClassMetrics>,
    /// Some aggregated precision or recall had a zero denominator.
    pub zero_division: bool,
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

pub fn classification_metrics(cm: &ConfusionMatrix, convention: Averaging) -> Result<MetricsReport> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::EmptyDataset("confusion matrix is empty".into()));
    }
    let k = cm.roster.len();
    let per_class: Vec<ClassMetrics> = (0..k)
        .map(|c| {
            let tp = cm.counts[c][c];
            let predicted: u64 = (0..k).map(|t| cm.counts[t][c]).sum();
            let actual: u64 = cm.counts[c].iter().sum();
            let precision = if predicted == 0 { 0.0 } else { tp as f64 / predicted as f64 };
            let recall = if actual == 0 { 0.0 } else { tp as f64 / actual as f64 };
            ClassMetrics {
                class: cm.roster[c],
                precision,
                recall,
                f1: f1(precision, recall),
                support: actual,
                precision_undefined: predicted == 0,
                recall_undefined: actual == 0,
            }
        })
        .collect();
    let accuracy = cm.accuracy();
    let (precision, recall, f1_score, zero_division) = match convention {
        Averaging::PositiveClass(class) => {
            let m = per_class
                .iter()
                .find(|m| m.class == class)
                .ok_or(Error::LabelOutsideRoster(class))?;
            (m.precision, m.recall, m.f1, m.precision_undefined || m.recall_undefined)
        }
        Averaging::Macro => {
            let n = k as f64;
            (
                per_class.iter().map(|m| m.precision).sum::<f64>() / n,
                per_class.iter().map(|m| m.recall).sum::<f64>() / n,
                per_class.iter().map(|m| m.f1).sum::<f64>() / n,
                per_class.iter().any(|m| m.precision_undefined || m.recall_undefined),
            )
        }
        Averaging::Micro => {
            let tp: u64 = (0..k).map(|c| cm.counts[c][c]).sum();
            let predicted: u64 = cm.counts.iter().flatten().sum();
            let precision = tp as f64 / predicted as f64;
            let recall = tp as f64 / total as f64;
            (precision, recall, f1(precision, recall), false)
        }
    };
    Ok(MetricsReport {
        accuracy,
        precision,
        recall,
        f1: f1_score,
        convention,
        per_class,
        zero_division,
    })
}

/// Trains `family` on the named columns of `train_set` and scores it on
/// `test_set`. Column order in `features` does not matter.
pub fn evaluate_feature_subset<S: AsRef<str>>(
    train_set: &Dataset,
    test_set: &Dataset,
    features: &[S],
    family: ModelFamily,
    hp: &Hyperparameters,
    seed: u64,
) -> Result<MetricsReport> {
    if features.is_empty() {
        return Err(Error::EmptyFeatureList);
    }
    let mut columns = train_set.schema().indices_of(features)?;
    columns.sort_unstable();
    columns.dedup();
    let train_p = train_set.project(&columns)?;
    let test_p = test_set.project(&columns)?;
    let model = train(family, hp, &train_p, seed)?;
    let predictions = model.predict(test_p.rows())?;
    let roster: Vec<u32> = train_set
        .roster()
        .iter()
        .chain(test_set.roster())
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let cm = confusion_matrix(test_p.labels(), &predictions, &roster)?;
    classification_metrics(&cm, Averaging::default_for(&roster))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Mismatch,
    SetMatch,
    ExactOrderMatch,
}

fn verdict(published: &[String], computed: &[String]) -> Verdict {
    if published == computed {
        Verdict::ExactOrderMatch
    } else if published.iter().collect::<BTreeSet<_>>() == computed.iter().collect::<BTreeSet<_>>() {
        Verdict::SetMatch
    } else {
        Verdict::Mismatch
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConformanceCell {
    pub setup: Setup,
    pub column: String,
    pub published: Vec<String>,
    pub computed: Vec<String>,
    pub verdict: Verdict,
    /// Published but not computed.
    pub missing: Vec<String>,
    /// Computed but not published.
    pub extra: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Requirement {
    /// Top-k set equals the published set.
    Set,
    /// Top-k order equals the published order.
    ExactOrder,
    /// The positive-score prefix equals the first `n` published entries.
    NonzeroPrefix(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequiredCheck {
    pub name: String,
    pub setup: Setup,
    pub column: String,
    pub requirement: Requirement,
    pub expected: Vec<String>,
    pub computed: Vec<String>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConformanceReport {
    pub cells: Vec<ConformanceCell>,
    pub required: Vec<RequiredCheck>,
    pub passed: bool,
}

/// The four cells that must reproduce.
pub const REQUIRED: [(Setup, PublishedColumn, Requirement); 4] = [
    (Setup::VeremiBinary, PublishedColumn::Leveled, Requirement::Set),
    (Setup::VeremiMulticlass, PublishedColumn::Leveled, Requirement::Set),
    (Setup::VeremiBinary, PublishedColumn::Method(XaiMethod::Lime), Requirement::ExactOrder),
    (
        Setup::VeremiBinary,
        PublishedColumn::Method(XaiMethod::Permutation),
        Requirement::NonzeroPrefix(3),
    ),
];

fn ranking_of(f: &TwoLevelFusion, column: PublishedColumn) -> Option<&crate::fusion::FusedRanking> {
    match column {
        PublishedColumn::Method(m) => f.per_method.get(&m),
        PublishedColumn::Leveled => Some(&f.leveled),
    }
}

/// Compares each computed setup's per-method and leveled rankings with the
/// published columns.
pub fn conformance_check(
    computed: &BTreeMap<Setup, TwoLevelFusion>,
    published: &PublishedColumns,
) -> Result<ConformanceReport> {
    let mut cells = Vec::new();
    for (&setup, fused) in computed {
        for column in PublishedColumn::ALL {
            let Some(expected) = published.get(setup, column) else {
                continue;
            };
            let Some(ranking) = ranking_of(fused, column) else {
                continue;
            };
            let k = expected.len().min(ranking.feature_count());
            let got: Vec<String> = ranking.ordered_names()[..k].iter().map(|s| s.to_string()).collect();
            cells.push(ConformanceCell {
                setup,
                column: column.label().to_string(),
                verdict: verdict(expected, &got),
                missing: expected.iter().filter(|e| !got.contains(e)).cloned().collect(),
                extra: got.iter().filter(|g| !expected.contains(g)).cloned().collect(),
                published: expected.to_vec(),
                computed: got,
            });
        }
    }
    let mut required = Vec::new();
    for (setup, column, requirement) in REQUIRED {
        let published_list = published
            .get(setup, column)
            .ok_or_else(|| Error::MissingFixture(format!("{setup} {column}")))?;
        let ranking = computed.get(&setup).and_then(|f| ranking_of(f, column));
        let (expected, got, passed) = match (requirement, ranking) {
            (_, None) => (published_list.to_vec(), Vec::new(), false),
            (Requirement::NonzeroPrefix(n), Some(r)) => {
                let expected = published_list[..n.min(published_list.len())].to_vec();
                let got: Vec<String> = r
                    .ordering
                    .iter()
                    .filter(|&&j| r.scores[j] > 0.0)
                    .map(|&j| r.feature_names[j].clone())
                    .collect();
                let passed = got == expected;
                (expected, got, passed)
            }
            (req, Some(r)) => {
                let k = published_list.len().min(r.feature_count());
                let got: Vec<String> = r.ordered_names()[..k].iter().map(|s| s.to_string()).collect();
                let v = verdict(published_list, &got);
                let passed = match req {
                    Requirement::ExactOrder => v == Verdict::ExactOrderMatch,
                    _ => v >= Verdict::SetMatch,
                };
                (published_list.to_vec(), got, passed)
            }
        };
        required.push(RequiredCheck {
            name: format!("{setup} {} {}", column.label(), requirement_label(requirement)),
            setup,
            column: column.label().to_string(),
            requirement,
            expected,
            computed: got,
            passed,
        });
    }
    let passed = required.iter().all(|r| r.passed);
    Ok(ConformanceReport {
        cells,
        required,
        passed,
    })
}

fn requirement_label(r: Requirement) -> String {
    match r {
        Requirement::Set => "top-k set".into(),
        Requirement::ExactOrder => "exact order".into(),
        Requirement::NonzeroPrefix(n) => format!("top-{n} order"),
    }
}

impl ConformanceReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn to_markdown(&self) -> String {
        let mut md = String::new();
        let _ = writeln!(md, "## Required checks\n");
        let _ = writeln!(md, "| Check | Expected | Computed | Result |");
        let _ = writeln!(md, "|---|---|---|---|");
        for r in &self.required {
            let _ = writeln!(
                md,
                "| {} | {} | {} | {} |",
                r.name,
                r.expected.join(", "),
                r.computed.join(", "),
                if r.passed { "pass" } else { "FAIL" }
            );
        }
        let _ = writeln!(md, "\n## All cells\n");
        let _ = writeln!(md, "| Setup | Column | Published | Computed | Verdict | Missing | Extra |");
        let _ = writeln!(md, "|---|---|---|---|---|---|---|");
        for c in &self.cells {
            let _ = writeln!(
                md,
                "| {} | {} | {} | {} | {} | {} | {} |",
                c.setup,
                c.column,
                c.published.join(", "),
                c.computed.join(", "),
                serde_json::to_value(c.verdict).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
                c.missing.join(", "),
                c.extra.join(", ")
            );
        }
        md
    }
}
