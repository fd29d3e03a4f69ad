use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Histogram;
use crate::roofline::Metric;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub metric: Metric,
    pub total: usize,
    pub counted: usize,
    /// Ground truth below epsilon.
    pub excluded: usize,
    /// No prediction for this metric.
    pub failed: usize,
    /// Counted pairs strictly below each threshold.
    pub below: Vec<usize>,
    /// `below / counted`; `None` when nothing was counted.
    pub proportions: Vec<Option<f64>>,
}

impl MetricRow {
    pub(crate) fn empty(metric: Metric, thresholds: usize) -> Self {
        Self {
            metric,
            total: 0,
            counted: 0,
            excluded: 0,
            failed: 0,
            below: vec![0; thresholds],
            proportions: vec![None; thresholds],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricHistograms {
    /// Normalized ground truth over ten unit bins.
    pub truth: Histogram,
    /// Relative errors of counted pairs.
    pub relative_error: Option<Histogram>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub thresholds: Vec<f64>,
    pub epsilon: f64,
    pub samples: usize,
    pub failed_samples: usize,
    pub failure_kinds: BTreeMap<String, usize>,
    pub rows: Vec<MetricRow>,
    /// Share of all counted pairs below the largest threshold.
    pub headline: Option<f64>,
    pub histograms: BTreeMap<String, MetricHistograms>,
}

fn pct(p: Option<f64>) -> String {
    p.map_or_else(|| "n/a".to_string(), |p| format!("{:.1}", p * 100.0))
}

impl EvalReport {
    pub fn row(&self, metric: Metric) -> Option<&MetricRow> {
        self.rows.iter().find(|r| r.metric == metric)
    }

    /// Percent-of-predictions table, one row per metric.
    pub fn to_markdown(&self) -> String {
        let mut s = String::from("# Evaluation report\n\n");
        let _ = writeln!(
            s,
            "- samples: {}\n- failed predictions: {}\n- epsilon: {}\n- within {:.0}% overall: {}%\n",
            self.samples,
            self.failed_samples,
            self.epsilon,
            self.thresholds.last().copied().unwrap_or(0.0) * 100.0,
            pct(self.headline),
        );
        s.push_str("| Metric |");
        for t in &self.thresholds {
            let _ = write!(s, " <{}% |", t * 100.0);
        }
        s.push_str(" Counted | Excluded | Failed |\n|---|");
        s.push_str(&"---:|".repeat(self.thresholds.len() + 3));
        s.push('\n');
        for r in &self.rows {
            let _ = write!(s, "| {} |", r.metric.label());
            for p in &r.proportions {
                let _ = write!(s, " {} |", pct(*p));
            }
            let _ = writeln!(s, " {} | {} | {} |", r.counted, r.excluded, r.failed);
        }
        if !self.failure_kinds.is_empty() {
            s.push_str("\n| Failure | Samples |\n|---|---:|\n");
            for (k, v) in &self.failure_kinds {
                let _ = writeln!(s, "| {k} | {v} |");
            }
        }
        s
    }
}

fn histogram_csv(h: &Histogram) -> String {
    let mut s = String::from("lower,upper,count\n");
    for (i, c) in h.counts.iter().enumerate() {
        let _ = writeln!(s, "{},{},{}", h.edges[i], h.edges[i + 1], c);
    }
    s
}

/// Writes `report.json`, `report.md` and per-metric histogram CSVs.
pub fn write_report(report: &EvalReport, dir: impl AsRef<Path>) -> std::io::Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(report)?)?;
    std::fs::write(dir.join("report.md"), report.to_markdown())?;
    let hdir = dir.join("histograms");
    std::fs::create_dir_all(&hdir)?;
    for (key, h) in &report.histograms {
        std::fs::write(hdir.join(format!("{key}.truth.csv")), histogram_csv(&h.truth))?;
        if let Some(e) = &h.relative_error {
            std::fs::write(hdir.join(format!("{key}.relative_error.csv")), histogram_csv(e))?;
        }
    }
    Ok(())
}
