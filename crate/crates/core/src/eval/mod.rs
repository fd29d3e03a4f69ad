//! Relative-error scoring of predictions against ground truth.

mod report;
mod run;

pub use report::{write_report, EvalReport, MetricHistograms, MetricRow};
pub use run::{
    evaluate, report_from_pairs, EvalCase, EvalConfig, HttpPredictClient, LocalPredictClient, PredictClient,
    PredictFailure,
};

use serde::{Deserialize, Serialize};

use crate::roofline::Metric;

pub const DEFAULT_THRESHOLDS: [f64; 5] = [0.02, 0.04, 0.06, 0.08, 0.10];

/// Ground truths below this are too close to zero for a relative error;
/// one quantum of the 3-decimal format.
pub const DEFAULT_EPSILON: f64 = 0.001;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("negative ground truth {0}")]
    NegativeTruth(f64),
    #[error("non-finite value at index {index}: {value}")]
    NonFinite { index: usize, value: f64 },
    #[error("value {value} at index {index} lies outside the histogram edges")]
    OutsideEdges { index: usize, value: f64 },
    #[error("invalid histogram bins: {0}")]
    Bins(String),
    #[error("thresholds must be strictly increasing and positive")]
    Thresholds,
    #[error("no samples")]
    NoSamples,
    #[error("backend unavailable for every sample: {0}")]
    BackendUnavailable(String),
    #[error("malformed test sample {id}: {message}")]
    Sample { id: String, message: String },
}

/// `|pred - gt| / gt`, or `None` when `gt < epsilon`.
pub fn relative_error(pred: f64, gt: f64, epsilon: f64) -> Result<Option<f64>, EvalError> {
    if gt < 0.0 {
        return Err(EvalError::NegativeTruth(gt));
    }
    if gt < epsilon {
        return Ok(None);
    }
    Ok(Some((pred - gt).abs() / gt))
}

/// One metric of one sample. `predicted` is `None` when the prediction for
/// the sample failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionPair {
    pub sample: String,
    pub metric: Metric,
    pub predicted: Option<f64>,
    pub truth: f64,
}

/// Per-metric threshold counts; rows in wire order, metrics without any pair
/// omitted.
pub fn threshold_table(
    pairs: &[PredictionPair],
    thresholds: &[f64],
    epsilon: f64,
) -> Result<Vec<MetricRow>, EvalError> {
    if thresholds.is_empty() || thresholds[0] <= 0.0 || thresholds.windows(2).any(|w| w[0] >= w[1]) {
        return Err(EvalError::Thresholds);
    }
    let mut rows: Vec<MetricRow> = Metric::ALL.iter().map(|&m| MetricRow::empty(m, thresholds.len())).collect();
    for p in pairs {
        let row = &mut rows[Metric::ALL.iter().position(|&m| m == p.metric).expect("every metric has a row")];
        row.total += 1;
        let Some(pred) = p.predicted else {
            row.failed += 1;
            continue;
        };
        match relative_error(pred, p.truth, epsilon)? {
            None => row.excluded += 1,
            Some(err) => {
                row.counted += 1;
                for (slot, &t) in row.below.iter_mut().zip(thresholds) {
                    if err < t {
                        *slot += 1;
                    }
                }
            }
        }
    }
    for row in &mut rows {
        row.proportions = row.below.iter().map(|&b| (row.counted > 0).then(|| b as f64 / row.counted as f64)).collect();
    }
    rows.retain(|r| r.total > 0);
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Bins {
    /// Equal-width bins spanning the data range.
    Count(usize),
    /// Explicit, strictly increasing edges.
    Edges(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `counts.len() + 1` edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// Bins include their lower edge and exclude their upper edge, except the
/// last bin, which includes both.
pub fn histogram(values: &[f64], bins: &Bins) -> Result<Histogram, EvalError> {
    if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(EvalError::NonFinite { index, value });
    }
    let edges = match bins {
        Bins::Edges(e) => {
            if e.len() < 2 || e.iter().any(|x| !x.is_finite()) || e.windows(2).any(|w| w[0] >= w[1]) {
                return Err(EvalError::Bins("need at least two finite, strictly increasing edges".into()));
            }
            e.clone()
        }
        Bins::Count(0) => return Err(EvalError::Bins("bin count must be positive".into())),
        Bins::Count(n) => {
            if values.is_empty() {
                return Err(EvalError::Bins("cannot size bins from no values".into()));
            }
            let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if lo == hi {
                vec![lo, lo + 1.0]
            } else {
                let mut e: Vec<f64> = (0..*n).map(|i| lo + (hi - lo) * i as f64 / *n as f64).collect();
                e.push(hi);
                e
            }
        }
    };
    let mut counts = vec![0; edges.len() - 1];
    let last = *edges.last().unwrap();
    for (index, &v) in values.iter().enumerate() {
        if v < edges[0] || v > last {
            return Err(EvalError::OutsideEdges { index, value: v });
        }
        let bin = if v == last { counts.len() - 1 } else { edges.partition_point(|&e| e <= v) - 1 };
        counts[bin] += 1;
    }
    Ok(Histogram { edges, counts })
}
