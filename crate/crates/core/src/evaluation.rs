//! Preference-benchmark harness: per-category accuracy, example-weighted
//! overall accuracy, macro average, and multi-model comparison tables.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{read_jsonl, DatasetError};
use crate::numeric::round1;
use crate::scoring::{ScoreError, ScoreRequest, Scorer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preferred {
    A,
    B,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkItem {
    pub id: String,
    pub category: String,
    pub prompt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_ref: Option<String>,
    pub response_a: String,
    pub response_b: String,
    pub preferred: Preferred,
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("benchmark is empty")]
    Empty,
    #[error("item {id:?}: {message}")]
    InvalidItem { id: String, message: String },
    #[error("every one of the {0} items failed to score")]
    AllErrored(usize),
    #[error("reports cover different benchmarks: {0:?}")]
    MixedBenchmarks(Vec<String>),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl EvalError {
    pub fn is_validation(&self) -> bool {
        match self {
            EvalError::Io { .. } => false,
            EvalError::Dataset(e) => e.is_validation(),
            _ => true,
        }
    }
}

impl BenchmarkItem {
    pub fn validate(&self) -> Result<(), EvalError> {
        let bad = |m: &str| Err(EvalError::InvalidItem { id: self.id.clone(), message: m.into() });
        if self.id.trim().is_empty() {
            return bad("id is empty");
        }
        if self.category.trim().is_empty() {
            return bad("category is empty");
        }
        Ok(())
    }

    /// The same item with the two responses (and the preference) swapped.
    pub fn swapped(&self) -> Self {
        Self {
            response_a: self.response_b.clone(),
            response_b: self.response_a.clone(),
            preferred: match self.preferred {
                Preferred::A => Preferred::B,
                Preferred::B => Preferred::A,
            },
            ..self.clone()
        }
    }
}

/// Reads a benchmark file, validating every item and id uniqueness.
pub fn load_benchmark(path: &Path) -> Result<Vec<BenchmarkItem>, EvalError> {
    let rows: Vec<(usize, BenchmarkItem)> = read_jsonl(path)?;
    let mut seen = HashSet::new();
    let mut items = Vec::with_capacity(rows.len());
    for (line, item) in rows {
        item.validate().map_err(|e| match e {
            EvalError::InvalidItem { id, message } => {
                EvalError::InvalidItem { id, message: format!("line {line}: {message}") }
            }
            other => other,
        })?;
        if !seen.insert(item.id.clone()) {
            return Err(EvalError::InvalidItem { id: item.id, message: format!("line {line}: duplicate id") });
        }
        items.push(item);
    }
    Ok(items)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Judgment {
    Correct,
    Incorrect,
    Tie,
}

/// Scores both responses; the higher score is the prediction. Exactly
/// equal scores are a tie.
pub fn judge_item(scorer: &dyn Scorer, item: &BenchmarkItem) -> Result<Judgment, ScoreError> {
    let req = |response| ScoreRequest { prompt: &item.prompt, image_ref: item.image_ref.as_deref(), response };
    let s_a = scorer.score(&req(&item.response_a))?;
    let s_b = scorer.score(&req(&item.response_b))?;
    if !s_a.is_finite() || !s_b.is_finite() {
        return Err(ScoreError(format!("non-finite score ({s_a}, {s_b})")));
    }
    let predicted = if s_a > s_b {
        Preferred::A
    } else if s_b > s_a {
        Preferred::B
    } else {
        return Ok(Judgment::Tie);
    };
    Ok(if predicted == item.preferred { Judgment::Correct } else { Judgment::Incorrect })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryResult {
    pub category: String,
    /// Items judged (errored items excluded).
    pub n: usize,
    pub correct: usize,
    pub ties: usize,
    pub errored: usize,
    /// Percent correct at full precision; `None` when `n == 0`.
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model_id: String,
    pub benchmark_id: String,
    /// In order of first appearance in the benchmark.
    pub categories: Vec<CategoryResult>,
    /// Sum of correct over sum of n, in percent.
    pub overall_accuracy: f64,
    /// Unweighted mean of the category accuracies, in percent.
    pub macro_average: f64,
    /// Ids of items whose scoring failed, sorted.
    pub errored_ids: Vec<String>,
}

impl EvalReport {
    pub fn category(&self, name: &str) -> Option<&CategoryResult> {
        self.categories.iter().find(|c| c.category == name)
    }

    pub fn total_judged(&self) -> usize {
        self.categories.iter().map(|c| c.n).sum()
    }
}

/// Unweighted mean. Used for macro averages over published per-category
/// values as well as over computed ones.
pub fn macro_average(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Judges every item (in parallel) and folds the results in input order.
/// Ties count as incorrect. Items whose scoring fails are excluded from the
/// denominators and listed in `errored_ids`.
pub fn evaluate(
    scorer: &dyn Scorer,
    items: &[BenchmarkItem],
    model_id: &str,
    benchmark_id: &str,
) -> Result<EvalReport, EvalError> {
    if items.is_empty() {
        return Err(EvalError::Empty);
    }
    for item in items {
        item.validate()?;
    }
    let judged: Vec<Result<Judgment, ScoreError>> = items.par_iter().map(|it| judge_item(scorer, it)).collect();

    let mut categories: Vec<CategoryResult> = Vec::new();
    let mut errored_ids = Vec::new();
    for (item, result) in items.iter().zip(judged) {
        let idx = match categories.iter().position(|c| c.category == item.category) {
            Some(i) => i,
            None => {
                categories.push(CategoryResult {
                    category: item.category.clone(),
                    n: 0,
                    correct: 0,
                    ties: 0,
                    errored: 0,
                    accuracy: None,
                });
                categories.len() - 1
            }
        };
        let c = &mut categories[idx];
        match result {
            Ok(j) => {
                c.n += 1;
                match j {
                    Judgment::Correct => c.correct += 1,
                    Judgment::Tie => c.ties += 1,
                    Judgment::Incorrect => {}
                }
            }
            Err(e) => {
                warn!("item {}: {e}", item.id);
                c.errored += 1;
                errored_ids.push(item.id.clone());
            }
        }
    }
    let judged_total: usize = categories.iter().map(|c| c.n).sum();
    if judged_total == 0 {
        return Err(EvalError::AllErrored(items.len()));
    }
    for c in &mut categories {
        c.accuracy = (c.n > 0).then(|| 100.0 * c.correct as f64 / c.n as f64);
    }
    let correct_total: usize = categories.iter().map(|c| c.correct).sum();
    let accs: Vec<f64> = categories.iter().filter_map(|c| c.accuracy).collect();
    errored_ids.sort();
    Ok(EvalReport {
        model_id: model_id.to_string(),
        benchmark_id: benchmark_id.to_string(),
        overall_accuracy: 100.0 * correct_total as f64 / judged_total as f64,
        macro_average: macro_average(&accs),
        categories,
        errored_ids,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Table,
    Json,
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{:.1}", round1(x)))
}

fn render_table(categories: &[String], rows: &[&EvalReport]) -> String {
    let mut header = vec!["Model".to_string()];
    header.extend(categories.iter().cloned());
    header.push("Overall".into());
    header.push("Macro".into());
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut cells = vec![r.model_id.clone()];
            cells.extend(categories.iter().map(|c| pct(r.category(c).and_then(|c| c.accuracy))));
            cells.push(pct(Some(r.overall_accuracy)));
            cells.push(pct(Some(r.macro_average)));
            cells
        })
        .collect();
    let widths: Vec<usize> = (0..header.len())
        .map(|i| body.iter().map(|r| r[i].len()).chain([header[i].len()]).max().unwrap_or(0))
        .collect();
    let line = |cells: &[String]| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        format!("| {} |\n", padded.join(" | "))
    };
    let mut out = line(&header);
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    out.push_str(&format!("|-{}-|\n", rule.join("-|-")));
    for r in &body {
        out.push_str(&line(r));
    }
    out
}

/// Renders a report. `Table` gives one row with a column per category plus
/// overall and macro, then per-category counts; `Json` is the report
/// serialized at full precision.
pub fn emit_report(report: &EvalReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("report serializes");
            s.push('\n');
            s
        }
        ReportFormat::Table => {
            let cats: Vec<String> = report.categories.iter().map(|c| c.category.clone()).collect();
            let mut out = format!("benchmark: {}\n\n", report.benchmark_id);
            out.push_str(&render_table(&cats, &[report]));
            out.push('\n');
            for c in &report.categories {
                let _ = writeln!(
                    out,
                    "{}: n={} correct={} ties={} errored={}",
                    c.category, c.n, c.correct, c.ties, c.errored
                );
            }
            if !report.errored_ids.is_empty() {
                let _ = writeln!(out, "errored items: {}", report.errored_ids.join(", "));
            }
            out
        }
    }
}

pub fn write_report(report: &EvalReport, format: ReportFormat, path: &Path) -> Result<(), EvalError> {
    std::fs::write(path, emit_report(report, format))
        .map_err(|source| EvalError::Io { path: path.to_path_buf(), source })
}

/// Orders reports by overall accuracy, highest first, breaking ties by
/// model id. All reports must share a benchmark id.
pub fn rank_reports(reports: &[EvalReport]) -> Result<Vec<&EvalReport>, EvalError> {
    let first = reports.first().ok_or(EvalError::Empty)?;
    if reports.iter().any(|r| r.benchmark_id != first.benchmark_id) {
        let mut ids: Vec<String> = reports.iter().map(|r| r.benchmark_id.clone()).collect();
        ids.sort();
        ids.dedup();
        return Err(EvalError::MixedBenchmarks(ids));
    }
    let mut ranked: Vec<&EvalReport> = reports.iter().collect();
    ranked.sort_by(|a, b| {
        b.overall_accuracy
            .total_cmp(&a.overall_accuracy)
            .then_with(|| a.model_id.cmp(&b.model_id))
    });
    Ok(ranked)
}

/// Ranking table over several models evaluated on the same benchmark.
pub fn compare_reports(reports: &[EvalReport]) -> Result<String, EvalError> {
    let ranked = rank_reports(reports)?;
    let mut cats: Vec<String> = Vec::new();
    for r in reports {
        for c in &r.categories {
            if !cats.contains(&c.category) {
                cats.push(c.category.clone());
            }
        }
    }
    Ok(format!("benchmark: {}\n\n{}", ranked[0].benchmark_id, render_table(&cats, &ranked)))
}
