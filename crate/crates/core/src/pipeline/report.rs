//! Serializable run summary, markdown rendering, and artifact emission.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{RunArtifacts, ALL_FEATURES};
use crate::error::{Error, Result};
use crate::evaluation::{ConformanceReport, MetricsReport};
use crate::explainers::write_importance_csv;
use crate::fixtures::{reference_metrics, ReferenceMetric, Setup};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFeature {
    pub name: String,
    pub score: f64,
    pub flagged: bool,
}

/// Everything needed to re-render the human-readable report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub top_k: usize,
    pub feature_names: Vec<String>,
    pub planted: Option<Vec<String>>,
    /// Method label -> fused top-k.
    pub per_method_top_k: BTreeMap<String, Vec<RankedFeature>>,
    pub leveled_top_k: Vec<RankedFeature>,
    /// Explained model -> test metrics.
    pub model_metrics: BTreeMap<String, MetricsReport>,
    /// Independent classifier -> feature set -> metrics.
    pub subset_metrics: BTreeMap<String, BTreeMap<String, MetricsReport>>,
    pub feature_sets: BTreeMap<String, Vec<String>>,
    pub reference_setup: Option<Setup>,
    pub conformance: Option<ConformanceReport>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub timings: Vec<StageTiming>,
    pub artifacts: Vec<String>,
}

fn ranked(top: Vec<crate::fusion::TopFeature>) -> Vec<RankedFeature> {
    top.into_iter()
        .map(|t| RankedFeature {
            name: t.name,
            score: t.score,
            flagged: t.flagged,
        })
        .collect()
}

impl Summary {
    pub fn from_artifacts(run: &RunArtifacts) -> Result<Self> {
        let k = run.config.fusion.top_k;
        let per_method_top_k = run
            .fusion
            .per_method
            .iter()
            .map(|(m, f)| Ok((m.label().to_string(), ranked(f.top_k(k)?))))
            .collect::<Result<_>>()?;
        Ok(Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: run.config_hash.clone(),
            seed: run.config.seed,
            top_k: k,
            feature_names: run.feature_names.clone(),
            planted: run.planted.clone(),
            per_method_top_k,
            leveled_top_k: ranked(run.fusion.leveled_top_k(k)?),
            model_metrics: run.model_metrics.clone(),
            subset_metrics: run.subset_metrics.clone(),
            feature_sets: run.feature_sets.clone(),
            reference_setup: run.config.reference_setup(),
            conformance: run.conformance.clone(),
            warnings: run.warnings.clone(),
        })
    }
}

const SET_COLUMNS: [&str; 5] = ["SHAP", "LIME", "DALEX", "Leveled", ALL_FEATURES];

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"))
}

fn metric_value(m: &MetricsReport, metric: &str) -> f64 {
    match metric {
        "Acc" => m.accuracy,
        "Prec" => m.precision,
        "Rec" => m.recall,
        _ => m.f1,
    }
}

fn top_line(features: &[RankedFeature]) -> String {
    features
        .iter()
        .map(|f| {
            if f.flagged {
                format!("{} ({:.2}, zero score)", f.name, f.score)
            } else {
                format!("{} ({:.2})", f.name, f.score)
            }
        })
        .collect::<Vec<_>>()
        .join(", ")
}

/// Markdown report; published reference rows are included when `references`
/// has entries for the run's setup.
pub fn render_summary_markdown(s: &Summary, references: &[ReferenceMetric]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# Feature fusion report\n");
    let _ = writeln!(out, "- seed: {}", s.seed);
    let _ = writeln!(out, "- config hash: `{}`", s.config_hash);
    let _ = writeln!(out, "- top-k: {}", s.top_k);
    if let Some(planted) = &s.planted {
        let _ = writeln!(out, "- planted features: {}", planted.join(", "));
    }
    let _ = writeln!(out, "\n## Top-{} features\n", s.top_k);
    let _ = writeln!(out, "| Method | Features |\n|---|---|");
    for (label, top) in &s.per_method_top_k {
        let _ = writeln!(out, "| {label} | {} |", top_line(top));
    }
    let _ = writeln!(out, "| Leveled | {} |", top_line(&s.leveled_top_k));

    if !s.model_metrics.is_empty() {
        let _ = writeln!(out, "\n## Explained models (test split)\n");
        let _ = writeln!(out, "| Model | Acc | Prec | Rec | F1 |\n|---|---|---|---|---|");
        for (name, m) in &s.model_metrics {
            let _ = writeln!(
                out,
                "| {name} | {:.4} | {:.4} | {:.4} | {:.4} |",
                m.accuracy, m.precision, m.recall, m.f1
            );
        }
    }

    for (classifier, sets) in &s.subset_metrics {
        let _ = writeln!(out, "\n## {classifier} on selected features\n");
        let _ = writeln!(out, "| Metric | {} |", SET_COLUMNS.join(" | "));
        let _ = writeln!(out, "|---|{}", "---|".repeat(SET_COLUMNS.len()));
        let published = classifier.trim_end_matches("-like");
        let refs: Vec<&ReferenceMetric> = references
            .iter()
            .filter(|r| Some(r.setup) == s.reference_setup && r.classifier == published)
            .collect();
        for metric in ["Acc", "Prec", "Rec", "F1"] {
            let row: Vec<String> = SET_COLUMNS
                .iter()
                .map(|c| cell(sets.get(*c).map(|m| metric_value(m, metric))))
                .collect();
            let _ = writeln!(out, "| {metric} | {} |", row.join(" | "));
            if let Some(r) = refs.iter().find(|r| r.metric == metric) {
                let _ = writeln!(
                    out,
                    "| {metric} (published {published}) | {:.2} | {:.2} | {:.2} | {:.2} | - |",
                    r.shap, r.lime, r.dalex, r.leveled
                );
            }
        }
    }

    if let Some(c) = &s.conformance {
        let _ = writeln!(out, "\n## Conformance\n");
        let _ = writeln!(out, "{}", c.to_markdown());
    }
    if !s.warnings.is_empty() {
        let _ = writeln!(out, "\n## Warnings\n");
        for w in &s.warnings {
            let _ = writeln!(out, "- {w}");
        }
    }
    out
}

struct Writer<'a> {
    dir: &'a Path,
    written: Vec<String>,
}

impl Writer<'_> {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn bytes(&mut self, name: &str, data: &[u8]) -> Result<()> {
        let path = self.path(name);
        fs::write(&path, data).map_err(|e| Error::io(&path, e))?;
        self.written.push(name.to_string());
        Ok(())
    }

    fn with<F: FnOnce(&mut Vec<u8>) -> Result<()>>(&mut self, name: &str, f: F) -> Result<()> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.bytes(name, &buf)
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.bytes(name, text.as_bytes())
    }
}

/// Writes every artifact of a run into `dir`, creating it if needed.
pub fn emit_report(run: &RunArtifacts, dir: &Path) -> Result<RunManifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut w = Writer { dir, written: Vec::new() };
    for (method, table) in &run.rank_tables {
        w.with(&format!("ranks_{}.csv", method.as_str()), |b| table.write_csv(&mut *b))?;
    }
    if !run.importances.is_empty() {
        w.with("importance.csv", |b| write_importance_csv(&mut *b, &run.importances))?;
    }
    for (method, fused) in &run.fusion.per_method {
        w.with(&format!("fused_{}.csv", method.as_str()), |b| fused.write_csv(&mut *b))?;
    }
    w.with("fused_leveled.csv", |b| run.fusion.leveled.write_csv(&mut *b))?;
    w.with("method_ranks.csv", |b| run.fusion.method_table.write_csv(&mut *b))?;
    if !run.model_metrics.is_empty() || !run.subset_metrics.is_empty() {
        #[derive(Serialize)]
        struct Metrics<'a> {
            models: &'a BTreeMap<String, MetricsReport>,
            feature_subsets: &'a BTreeMap<String, BTreeMap<String, MetricsReport>>,
        }
        w.json(
            "metrics.json",
            &Metrics {
                models: &run.model_metrics,
                feature_subsets: &run.subset_metrics,
            },
        )?;
    }
    if let Some(c) = &run.conformance {
        w.json("conformance.json", c)?;
        w.bytes("conformance.md", c.to_markdown().as_bytes())?;
    }
    let summary = Summary::from_artifacts(run)?;
    w.json("summary.json", &summary)?;
    let references = reference_metrics()?;
    w.bytes("summary.md", render_summary_markdown(&summary, &references).as_bytes())?;
    w.written.push("manifest.json".to_string());
    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: run.config_hash.clone(),
        seed: run.config.seed,
        timings: run.timings.clone(),
        artifacts: w.written.clone(),
    };
    w.json("manifest.json", &manifest)?;
    w.written.pop();
    Ok(manifest)
}
