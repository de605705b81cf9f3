//! Confusion matrices, per-class precision/recall/F1, corpus statistics and
//! report rendering (markdown tables and structured JSON).

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{BloomLevel, LabelScheme};
use crate::textmetrics::TextMetrics;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("{gold} gold labels but {pred} predictions")]
    LengthMismatch { gold: usize, pred: usize },
    #[error("class index {index} outside 0..{classes}")]
    IndexOutOfRange { index: usize, classes: usize },
    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("{to} is not a coarsening of {from}")]
    NotACoarsening { from: LabelScheme, to: LabelScheme },
    #[error("need at least 2 records, got {0}")]
    InsufficientData(usize),
    #[error("invalid report JSON: {0}")]
    Json(String),
}

/// Rows are gold classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub class_names: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn k(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.k()).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_sum(&self, k: usize) -> u64 {
        self.counts[k].iter().sum()
    }

    pub fn col_sum(&self, k: usize) -> u64 {
        self.counts.iter().map(|r| r[k]).sum()
    }
}

pub fn confusion<S: AsRef<str>>(
    gold: &[usize],
    pred: &[usize],
    class_names: &[S],
) -> Result<ConfusionMatrix, EvalError> {
    if gold.len() != pred.len() {
        return Err(EvalError::LengthMismatch {
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    let k = class_names.len();
    let mut counts = vec![vec![0u64; k]; k];
    for (&g, &p) in gold.iter().zip(pred) {
        if let Some(&index) = [g, p].iter().find(|&&i| i >= k) {
            return Err(EvalError::IndexOutOfRange { index, classes: k });
        }
        counts[g][p] += 1;
    }
    Ok(ConfusionMatrix {
        class_names: class_names.iter().map(|s| s.as_ref().to_string()).collect(),
        counts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

/// Provenance carried alongside the numbers of one evaluation.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunMetadata {
    pub experiment: String,
    pub scheme: String,
    pub feature_mode: String,
    pub model_kind: String,
    pub seed: u64,
    pub split_fraction: f64,
    pub balanced: bool,
    pub rng: String,
    pub hyperparameters: BTreeMap<String, f64>,
    /// Zero-division and similar notices raised while computing metrics.
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub classes: Vec<ClassMetrics>,
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub confusion: ConfusionMatrix,
    pub metadata: RunMetadata,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Undefined precision/recall/F1 (zero denominators) are reported as 0 and
/// noted in `metadata.warnings`.
pub fn classification_report(cm: &ConfusionMatrix) -> Result<EvalReport, EvalError> {
    let total = cm.total();
    if total == 0 {
        return Err(EvalError::EmptyMatrix);
    }
    let mut warnings = Vec::new();
    let classes: Vec<ClassMetrics> = (0..cm.k())
        .map(|k| {
            let name = &cm.class_names[k];
            let tp = cm.counts[k][k];
            let precision = ratio(tp, cm.col_sum(k)).unwrap_or_else(|| {
                warnings.push(format!("precision of {name} undefined (never predicted); set to 0"));
                0.0
            });
            let recall = ratio(tp, cm.row_sum(k)).unwrap_or_else(|| {
                warnings.push(format!("recall of {name} undefined (no gold samples); set to 0"));
                0.0
            });
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            ClassMetrics {
                class: name.clone(),
                precision,
                recall,
                f1,
                support: cm.row_sum(k),
            }
        })
        .collect();
    let k = classes.len() as f64;
    let mean = |f: fn(&ClassMetrics) -> f64| classes.iter().map(f).sum::<f64>() / k;
    Ok(EvalReport {
        accuracy: cm.trace() as f64 / total as f64,
        macro_precision: mean(|c| c.precision),
        macro_recall: mean(|c| c.recall),
        macro_f1: mean(|c| c.f1),
        classes,
        confusion: cm.clone(),
        metadata: RunMetadata {
            warnings,
            ..Default::default()
        },
    })
}

/// Maps gold and predicted classes of `from` through the coarsening onto
/// `to`, then reports under `to`.
pub fn merge_report(
    gold: &[usize],
    pred: &[usize],
    from: LabelScheme,
    to: LabelScheme,
) -> Result<EvalReport, EvalError> {
    let table = from.coarsening_to(to).ok_or(EvalError::NotACoarsening { from, to })?;
    let map = |labels: &[usize]| -> Result<Vec<usize>, EvalError> {
        labels
            .iter()
            .map(|&c| {
                table.get(c).copied().ok_or(EvalError::IndexOutOfRange {
                    index: c,
                    classes: table.len(),
                })
            })
            .collect()
    };
    let cm = confusion(&map(gold)?, &map(pred)?, to.class_names())?;
    let mut report = classification_report(&cm)?;
    report.metadata.scheme = to.name().to_string();
    Ok(report)
}

/// Fraction of positions where `gold` and `pred` agree (0 for empty input).
pub fn accuracy(gold: &[usize], pred: &[usize]) -> f64 {
    if gold.is_empty() {
        return 0.0;
    }
    gold.iter().zip(pred).filter(|(g, p)| g == p).count() as f64 / gold.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "L")]
    Length,
    #[serde(rename = "FKGL")]
    Fkgl,
    #[serde(rename = "TTR")]
    Ttr,
    #[serde(rename = "LD")]
    Ld,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Length, Metric::Fkgl, Metric::Ttr, Metric::Ld];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Length => "L",
            Metric::Fkgl => "FKGL",
            Metric::Ttr => "TTR",
            Metric::Ld => "LD",
        }
    }

    fn of(self, m: &TextMetrics) -> f64 {
        m.as_array()[self as usize]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub level: BloomLevel,
    pub count: usize,
    /// Indexed like [`Metric::ALL`].
    pub mean: [f64; 4],
    /// Population standard deviation.
    pub std: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub x: Metric,
    pub y: Metric,
    /// Absent when either variable has zero variance.
    pub r: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub per_level: Vec<LevelSummary>,
    pub correlations: Vec<Correlation>,
}

impl CorpusStats {
    pub fn correlation(&self, x: Metric, y: Metric) -> Option<f64> {
        self.correlations
            .iter()
            .find(|c| (c.x, c.y) == (x, y) || (c.x, c.y) == (y, x))
            .and_then(|c| c.r)
    }

    pub fn level(&self, level: BloomLevel) -> Option<&LevelSummary> {
        self.per_level.iter().find(|s| s.level == level)
    }
}

/// Pearson correlation, or `None` when a variance is zero or the lengths
/// differ or fall below 2.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Per-level means and deviations of the four metrics, plus Pearson r for
/// every metric pair over the whole corpus. Levels with no records are
/// omitted.
pub fn corpus_stats(rows: &[(BloomLevel, TextMetrics)]) -> Result<CorpusStats, EvalError> {
    if rows.len() < 2 {
        return Err(EvalError::InsufficientData(rows.len()));
    }
    let mut per_level = Vec::new();
    for level in BloomLevel::ALL {
        let group: Vec<&TextMetrics> = rows.iter().filter(|(l, _)| *l == level).map(|(_, m)| m).collect();
        if group.is_empty() {
            continue;
        }
        let mut mean = [0.0; 4];
        let mut std = [0.0; 4];
        for metric in Metric::ALL {
            let (m, s) = mean_std(group.iter().map(|t| metric.of(t)));
            mean[metric as usize] = m;
            std[metric as usize] = s;
        }
        per_level.push(LevelSummary {
            level,
            count: group.len(),
            mean,
            std,
        });
    }

    let column = |m: Metric| rows.iter().map(|(_, t)| m.of(t)).collect::<Vec<_>>();
    let mut correlations = Vec::new();
    for (i, &x) in Metric::ALL.iter().enumerate() {
        for &y in &Metric::ALL[i + 1..] {
            correlations.push(Correlation {
                x,
                y,
                r: pearson(&column(x), &column(y)),
            });
        }
    }
    Ok(CorpusStats {
        per_level,
        correlations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Markdown,
}

/// Row order used in markdown tables: the six-level scheme lists levels
/// lowest first, merged schemes list the merged higher classes first.
pub fn display_order(report: &EvalReport) -> Vec<usize> {
    let k = report.classes.len();
    match report.metadata.scheme.parse::<LabelScheme>() {
        Ok(LabelScheme::Merged4 | LabelScheme::Merged3) => (0..k).rev().collect(),
        _ => (0..k).collect(),
    }
}

fn report_title(report: &EvalReport) -> String {
    let md = &report.metadata;
    let mut parts = Vec::new();
    if !md.model_kind.is_empty() {
        parts.push(format!("model: {}", md.model_kind));
    }
    if !md.feature_mode.is_empty() {
        parts.push(format!("features: {}", md.feature_mode));
    }
    if !md.scheme.is_empty() {
        parts.push(format!("scheme: {}", md.scheme));
    }
    parts.push(format!("seed: {}", md.seed));
    let name = if md.experiment.is_empty() {
        "run"
    } else {
        md.experiment.as_str()
    };
    format!("### {name} ({})", parts.join(", "))
}

pub fn render_markdown(report: &EvalReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{}", report_title(report));
    out.push('\n');
    out.push_str("| Level | Precision | Recall | F1-score |\n");
    out.push_str("|:------|----------:|-------:|---------:|\n");
    for k in display_order(report) {
        let c = &report.classes[k];
        let _ = writeln!(
            out,
            "| {} | {:.2} | {:.2} | {:.2} |",
            c.class, c.precision, c.recall, c.f1
        );
    }
    let _ = writeln!(out, "| Accuracy | | | {:.2} |", report.accuracy);
    out
}

pub fn render_json(report: &EvalReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

pub fn parse_json(text: &str) -> Result<EvalReport, EvalError> {
    serde_json::from_str(text).map_err(|e| EvalError::Json(e.to_string()))
}

pub fn emit_report(report: &EvalReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => render_json(report),
        ReportFormat::Markdown => render_markdown(report),
    }
}

/// One line of a cross-experiment comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub experiment: String,
    pub method: String,
    pub accuracy: f64,
    pub notes: String,
}

impl ComparisonRow {
    pub fn from_report(report: &EvalReport) -> Self {
        let md = &report.metadata;
        let method = md
            .model_kind
            .parse::<crate::models::ModelKind>()
            .map(|k| k.display_name().to_string())
            .unwrap_or_else(|_| md.model_kind.clone());
        let weakest = report
            .classes
            .iter()
            .filter(|c| c.support > 0)
            .min_by(|a, b| a.f1.total_cmp(&b.f1))
            .map(|c| format!("; lowest F1 {} ({:.2})", c.class, c.f1))
            .unwrap_or_default();
        ComparisonRow {
            experiment: md.experiment.clone(),
            method,
            accuracy: report.accuracy,
            notes: format!("scheme {}, features {}{weakest}", md.scheme, md.feature_mode),
        }
    }
}

pub fn render_comparison(rows: &[ComparisonRow]) -> String {
    let mut out =
        String::from("| Experiment | Method | Accuracy | Notes |\n|:-----------|:-------|---------:|:------|\n");
    for r in rows {
        let _ = writeln!(
            out,
            "| {} | {} | {:.2} | {} |",
            r.experiment, r.method, r.accuracy, r.notes
        );
    }
    out
}

pub fn render_stats_markdown(stats: &CorpusStats) -> String {
    let mut out = String::from("| Level | Count | L | FKGL | TTR | LD |\n|:------|------:|--:|-----:|----:|---:|\n");
    for s in &stats.per_level {
        let _ = writeln!(
            out,
            "| {} | {} | {:.2} | {:.2} | {:.2} | {:.2} |",
            s.level, s.count, s.mean[0], s.mean[1], s.mean[2], s.mean[3]
        );
    }
    out.push('\n');
    for c in &stats.correlations {
        match c.r {
            Some(r) => {
                let _ = writeln!(out, "Pearson r({}, {}) = {r:.4}", c.x.name(), c.y.name());
            }
            None => {
                let _ = writeln!(out, "Pearson r({}, {}) = n/a (zero variance)", c.x.name(), c.y.name());
            }
        }
    }
    out
}

/// Per-level summary as CSV: one row per level with mean and std columns.
pub fn render_stats_csv(stats: &CorpusStats) -> String {
    let mut out = String::from("level,count");
    for m in Metric::ALL {
        let _ = write!(out, ",{0}_mean,{0}_std", m.name());
    }
    out.push('\n');
    for s in &stats.per_level {
        let _ = write!(out, "{},{}", s.level, s.count);
        for j in 0..4 {
            let _ = write!(out, ",{},{}", s.mean[j], s.std[j]);
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tally() {
        let cm = confusion(&[0, 1, 1], &[0, 0, 1], &["a", "b"]).unwrap();
        assert_eq!(cm.counts, vec![vec![1, 0], vec![1, 1]]);
        let r = classification_report(&cm).unwrap();
        assert_eq!(r.classes[0].precision, 0.5);
        assert_eq!(r.classes[0].recall, 1.0);
        assert!((r.classes[0].f1 - 2.0 / 3.0).abs() < 1e-15);
        assert!((r.accuracy - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn perfect_predictions() {
        let gold = [0, 1, 2, 2];
        let cm = confusion(&gold, &gold, &["a", "b", "c"]).unwrap();
        assert_eq!(cm.counts, vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 2]]);
        let r = classification_report(&cm).unwrap();
        assert!(r
            .classes
            .iter()
            .all(|c| c.precision == 1.0 && c.recall == 1.0 && c.f1 == 1.0));
        assert_eq!(r.accuracy, 1.0);
        assert!(r.metadata.warnings.is_empty());
    }

    #[test]
    fn absent_class_scores_zero() {
        let cm = confusion(&[0, 1], &[0, 1], &["a", "b", "c"]).unwrap();
        let r = classification_report(&cm).unwrap();
        let c = &r.classes[2];
        assert_eq!((c.precision, c.recall, c.f1, c.support), (0.0, 0.0, 0.0, 0));
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.metadata.warnings.len(), 2);
    }

    #[test]
    fn confusion_errors() {
        assert!(matches!(
            confusion(&[0], &[0, 1], &["a", "b"]),
            Err(EvalError::LengthMismatch { .. })
        ));
        assert!(matches!(
            confusion(&[0], &[2], &["a", "b"]),
            Err(EvalError::IndexOutOfRange { index: 2, classes: 2 })
        ));
        let empty = confusion(&[], &[], &["a", "b"]).unwrap();
        assert_eq!(empty.counts, vec![vec![0, 0], vec![0, 0]]);
        assert_eq!(classification_report(&empty).unwrap_err(), EvalError::EmptyMatrix);
    }

    #[test]
    fn merging_turns_higher_order_confusions_into_hits() {
        use BloomLevel::*;
        let gold = [Analysis.index()];
        let pred = [Synthesis.index()];
        let full = merge_report(&gold, &pred, LabelScheme::Full6, LabelScheme::Full6).unwrap();
        let merged = merge_report(&gold, &pred, LabelScheme::Full6, LabelScheme::Merged4).unwrap();
        assert_eq!(full.accuracy, 0.0);
        assert_eq!(merged.accuracy, 1.0);

        let gold = [Knowledge.index()];
        let pred = [Comprehension.index()];
        let merged = merge_report(&gold, &pred, LabelScheme::Full6, LabelScheme::Merged4).unwrap();
        assert_eq!(merged.accuracy, 0.0);

        assert_eq!(
            merge_report(&[0], &[0], LabelScheme::Merged3, LabelScheme::Full6).unwrap_err(),
            EvalError::NotACoarsening {
                from: LabelScheme::Merged3,
                to: LabelScheme::Full6
            }
        );
    }

    #[test]
    fn pearson_edge_cases() {
        let x = [1.0, 2.0, 3.0, 5.0];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &x).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson(&x, &neg).unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(pearson(&[2.0; 4], &x), None);
        assert_eq!(pearson(&[1.0], &[1.0]), None);
    }

    #[test]
    fn corpus_stats_needs_two_rows() {
        let m = TextMetrics {
            length_l: 3,
            fkgl: 1.0,
            ttr: 1.0,
            ld: 0.5,
        };
        assert_eq!(
            corpus_stats(&[(BloomLevel::Knowledge, m)]).unwrap_err(),
            EvalError::InsufficientData(1)
        );
        let s = corpus_stats(&[(BloomLevel::Knowledge, m), (BloomLevel::Analysis, m)]).unwrap();
        assert_eq!(s.per_level.len(), 2);
        assert_eq!(s.correlation(Metric::Length, Metric::Fkgl), None);
        assert_eq!(s.correlations.len(), 6);
    }

    #[test]
    fn markdown_layout_for_perfect_run() {
        let gold = [0, 1, 2, 3];
        let cm = confusion(&gold, &gold, LabelScheme::Merged4.class_names()).unwrap();
        let mut r = classification_report(&cm).unwrap();
        r.metadata.scheme = "merged4".into();
        let md = render_markdown(&r);
        let body: Vec<&str> = md.lines().skip(2).collect();
        assert_eq!(
            body,
            [
                "| Level | Precision | Recall | F1-score |",
                "|:------|----------:|-------:|---------:|",
                "| Higher-Order | 1.00 | 1.00 | 1.00 |",
                "| Application | 1.00 | 1.00 | 1.00 |",
                "| Comprehension | 1.00 | 1.00 | 1.00 |",
                "| Knowledge | 1.00 | 1.00 | 1.00 |",
                "| Accuracy | | | 1.00 |",
            ]
        );
    }

    #[test]
    fn comparison_table_has_one_row_per_run() {
        let rows = [
            ComparisonRow {
                experiment: "exp4".into(),
                method: "Naive Bayes".into(),
                accuracy: 0.791,
                notes: "x".into(),
            },
            ComparisonRow {
                experiment: "exp5".into(),
                method: "Linear SVC".into(),
                accuracy: 0.834,
                notes: "y".into(),
            },
        ];
        let t = render_comparison(&rows);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines[0], "| Experiment | Method | Accuracy | Notes |");
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[2], "| exp4 | Naive Bayes | 0.79 | x |");
    }

    #[test]
    fn json_round_trip() {
        let cm = confusion(&[0, 1, 1, 2], &[0, 2, 1, 2], &["a", "b", "c"]).unwrap();
        let mut r = classification_report(&cm).unwrap();
        r.metadata.hyperparameters.insert("alpha".into(), 0.1 + 0.2);
        assert_eq!(parse_json(&render_json(&r)).unwrap(), r);
    }
}
