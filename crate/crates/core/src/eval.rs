//! Confusion matrices and accuracy / precision / recall / F1 for the three
//! sentiment classes.
//!
//! Precision, recall and F1 are binary metrics; each class is scored
//! one-vs-rest and the per-class values are combined by macro (unweighted
//! mean), weighted (support-weighted mean) or micro (pooled counts)
//! averaging. When a denominator is zero the metric is reported as 0 and
//! the class is flagged.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Sentiment;

const K: usize = Sentiment::COUNT;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("label sequences differ in length: {actual} actual vs {predicted} predicted")]
    LengthMismatch { actual: usize, predicted: usize },
    #[error("confusion matrix is empty")]
    Empty,
    #[error("unknown averaging scheme {0:?} (expected macro, micro or weighted)")]
    UnknownAveraging(String),
}

/// Rows are actual classes, columns predicted classes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix3 {
    pub counts: [[u64; K]; K],
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix3 {
    pub fn from_counts(counts: [[u64; K]; K]) -> Self {
        ConfusionMatrix3 { counts }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..K).map(|k| self.counts[k][k]).sum()
    }

    /// Actual-class count for `class`.
    pub fn support(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    /// One-vs-rest reduction for `class`.
    pub fn per_class_binary(&self, class: usize) -> BinaryCounts {
        let tp = self.counts[class][class];
        let fp: u64 = (0..K)
            .filter(|&a| a != class)
            .map(|a| self.counts[a][class])
            .sum();
        let fn_: u64 = (0..K)
            .filter(|&p| p != class)
            .map(|p| self.counts[class][p])
            .sum();
        BinaryCounts {
            tp,
            fp,
            fn_,
            tn: self.total() - tp - fp - fn_,
        }
    }
}

pub fn confusion(
    actual: &[Sentiment],
    predicted: &[Sentiment],
) -> Result<ConfusionMatrix3, EvalError> {
    if actual.len() != predicted.len() {
        return Err(EvalError::LengthMismatch {
            actual: actual.len(),
            predicted: predicted.len(),
        });
    }
    let mut cm = ConfusionMatrix3::default();
    for (a, p) in actual.iter().zip(predicted) {
        cm.counts[a.index()][p.index()] += 1;
    }
    Ok(cm)
}

pub fn per_class_binary(cm: &ConfusionMatrix3, class: Sentiment) -> BinaryCounts {
    cm.per_class_binary(class.index())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Averaging {
    #[default]
    Macro,
    Micro,
    Weighted,
}

impl fmt::Display for Averaging {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Averaging::Macro => "macro",
            Averaging::Micro => "micro",
            Averaging::Weighted => "weighted",
        })
    }
}

impl FromStr for Averaging {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "macro" => Ok(Averaging::Macro),
            "micro" => Ok(Averaging::Micro),
            "weighted" => Ok(Averaging::Weighted),
            other => Err(EvalError::UnknownAveraging(other.to_string())),
        }
    }
}

/// Which of a class's metrics hit a zero denominator.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZeroDivision {
    pub precision: bool,
    pub recall: bool,
    pub f1: bool,
}

impl ZeroDivision {
    pub fn any(&self) -> bool {
        self.precision || self.recall || self.f1
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: Sentiment,
    pub counts: BinaryCounts,
    pub support: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub zero_division: ZeroDivision,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub total: u64,
    pub accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
    #[serde(rename = "macro")]
    pub macro_avg: Aggregate,
    #[serde(rename = "micro")]
    pub micro_avg: Aggregate,
    #[serde(rename = "weighted")]
    pub weighted_avg: Aggregate,
    /// Scheme used for the headline precision/recall/F1.
    pub averaging: Averaging,
    pub confusion: ConfusionMatrix3,
}

impl MetricsReport {
    pub fn aggregate(&self, averaging: Averaging) -> &Aggregate {
        match averaging {
            Averaging::Macro => &self.macro_avg,
            Averaging::Micro => &self.micro_avg,
            Averaging::Weighted => &self.weighted_avg,
        }
    }

    pub fn headline(&self) -> &Aggregate {
        self.aggregate(self.averaging)
    }

    /// Classes with at least one zero-denominator metric.
    pub fn flagged_classes(&self) -> Vec<Sentiment> {
        self.per_class
            .iter()
            .filter(|c| c.zero_division.any())
            .map(|c| c.class)
            .collect()
    }
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

fn harmonic(p: f64, r: f64) -> (f64, bool) {
    if p + r == 0.0 {
        (0.0, true)
    } else {
        (2.0 * p * r / (p + r), false)
    }
}

/// Accuracy plus per-class and averaged precision/recall/F1.
pub fn metrics(cm: &ConfusionMatrix3, averaging: Averaging) -> Result<MetricsReport, EvalError> {
    let total = cm.total();
    if total == 0 {
        return Err(EvalError::Empty);
    }
    let accuracy = cm.trace() as f64 / total as f64;

    let per_class: Vec<ClassMetrics> = Sentiment::ALL
        .iter()
        .map(|&class| {
            let counts = cm.per_class_binary(class.index());
            let (precision, p0) = ratio(counts.tp, counts.tp + counts.fp);
            let (recall, r0) = ratio(counts.tp, counts.tp + counts.fn_);
            let (f1, f0) = harmonic(precision, recall);
            ClassMetrics {
                class,
                counts,
                support: cm.support(class.index()),
                precision,
                recall,
                f1,
                zero_division: ZeroDivision {
                    precision: p0,
                    recall: r0,
                    f1: f0,
                },
            }
        })
        .collect();

    let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / K as f64;
    let macro_avg = Aggregate {
        precision: mean(|c| c.precision),
        recall: mean(|c| c.recall),
        f1: mean(|c| c.f1),
    };

    let weighted = |f: fn(&ClassMetrics) -> f64| {
        per_class
            .iter()
            .map(|c| c.support as f64 * f(c))
            .sum::<f64>()
            / total as f64
    };
    let weighted_avg = Aggregate {
        precision: weighted(|c| c.precision),
        recall: weighted(|c| c.recall),
        f1: weighted(|c| c.f1),
    };

    let (tp, fp, fn_) = per_class.iter().fold((0, 0, 0), |(tp, fp, fn_), c| {
        (tp + c.counts.tp, fp + c.counts.fp, fn_ + c.counts.fn_)
    });
    let (micro_p, _) = ratio(tp, tp + fp);
    let (micro_r, _) = ratio(tp, tp + fn_);
    let (micro_f1, _) = harmonic(micro_p, micro_r);
    let micro_avg = Aggregate {
        precision: micro_p,
        recall: micro_r,
        f1: micro_f1,
    };
    debug_assert!((micro_p - accuracy).abs() < 1e-12 && (micro_r - accuracy).abs() < 1e-12);

    Ok(MetricsReport {
        total,
        accuracy,
        per_class,
        macro_avg,
        micro_avg,
        weighted_avg,
        averaging,
        confusion: *cm,
    })
}

pub fn evaluate(
    actual: &[Sentiment],
    predicted: &[Sentiment],
    averaging: Averaging,
) -> Result<MetricsReport, EvalError> {
    metrics(&confusion(actual, predicted)?, averaging)
}

/// One model's row in a comparison table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub model: String,
    pub metrics: MetricsReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub averaging: Averaging,
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonReport {
    /// Aligned table: Accuracy, Precision, Recall, F1 in percent with two
    /// decimals, followed by the averaging scheme of the P/R/F1 columns.
    pub fn to_text(&self) -> String {
        let width = self
            .rows
            .iter()
            .map(|r| r.model.chars().count())
            .max()
            .unwrap_or(0)
            .max("Model".len());
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<width$}  {:>12}  {:>13}  {:>10}  {:>12}  {:<9}",
            "Model", "Accuracy (%)", "Precision (%)", "Recall (%)", "F1 Score (%)", "Averaging"
        );
        for row in &self.rows {
            let m = &row.metrics;
            let agg = m.aggregate(self.averaging);
            let _ = writeln!(
                out,
                "{:<width$}  {:>12.2}  {:>13.2}  {:>10.2}  {:>12.2}  {:<9}",
                row.model,
                100.0 * m.accuracy,
                100.0 * agg.precision,
                100.0 * agg.recall,
                100.0 * agg.f1,
                self.averaging
            );
        }
        for row in &self.rows {
            let flagged = row.metrics.flagged_classes();
            if !flagged.is_empty() {
                let names: Vec<_> = flagged.iter().map(|c| c.name()).collect();
                let _ = writeln!(
                    out,
                    "note: {} has zero-denominator metrics (reported as 0) for: {}",
                    row.model,
                    names.join(", ")
                );
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Per-class detail and confusion matrix for a single evaluation.
pub fn render_metrics_text(report: &MetricsReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "examples: {}", report.total);
    let _ = writeln!(out, "accuracy: {:.2}%", 100.0 * report.accuracy);
    let _ = writeln!(
        out,
        "{:<10}  {:>13}  {:>10}  {:>12}  {:>7}",
        "class", "Precision (%)", "Recall (%)", "F1 Score (%)", "support"
    );
    for c in &report.per_class {
        let flag = if c.zero_division.any() { "  *" } else { "" };
        let _ = writeln!(
            out,
            "{:<10}  {:>13.2}  {:>10.2}  {:>12.2}  {:>7}{flag}",
            c.class.name(),
            100.0 * c.precision,
            100.0 * c.recall,
            100.0 * c.f1,
            c.support
        );
    }
    for avg in [Averaging::Macro, Averaging::Micro, Averaging::Weighted] {
        let a = report.aggregate(avg);
        let marker = if avg == report.averaging {
            " (headline)"
        } else {
            ""
        };
        let _ = writeln!(
            out,
            "{:<10}  {:>13.2}  {:>10.2}  {:>12.2}{marker}",
            avg.to_string(),
            100.0 * a.precision,
            100.0 * a.recall,
            100.0 * a.f1
        );
    }
    let _ = writeln!(out, "confusion (rows actual, columns predicted):");
    for (class, row) in Sentiment::ALL.iter().zip(report.confusion.counts.iter()) {
        let _ = writeln!(
            out,
            "  {:<10} {:>7} {:>7} {:>7}",
            class.name(),
            row[0],
            row[1],
            row[2]
        );
    }
    if report.per_class.iter().any(|c| c.zero_division.any()) {
        let _ = writeln!(out, "* zero denominator; metric reported as 0");
    }
    out
}
