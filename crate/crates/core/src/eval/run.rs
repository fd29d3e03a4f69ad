use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use futures::stream::{self, StreamExt};
use serde_json::{json, Value};

use super::{
    histogram, threshold_table, Bins, EvalError, EvalReport, MetricHistograms, PredictionPair, DEFAULT_EPSILON,
    DEFAULT_THRESHOLDS,
};
use crate::dataset::TrainingSample;
use crate::predict::{extract_json, ExtractMode, PredictError, PredictRequest, PredictResponseBody, Registry};
use crate::prompt::parse_user_turn;
use crate::roofline::{Metric, NormalizedCounters};

/// A failed prediction as seen by the evaluator.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictFailure {
    /// Stable error name, e.g. `invalid_json` or `timeout`.
    pub kind: String,
    pub message: String,
    /// The backend could not be reached at all.
    pub unavailable: bool,
}

impl From<PredictError> for PredictFailure {
    fn from(e: PredictError) -> Self {
        PredictFailure {
            kind: e.kind().to_string(),
            unavailable: matches!(e, PredictError::Unavailable { .. }),
            message: e.to_string(),
        }
    }
}

/// Anything that turns a request into normalized counters.
#[async_trait]
pub trait PredictClient: Send + Sync {
    async fn predict(&self, req: PredictRequest) -> Result<NormalizedCounters, PredictFailure>;
}

/// In-process client over a [`Registry`].
pub struct LocalPredictClient {
    pub registry: Arc<Registry>,
    pub backend: Option<String>,
}

#[async_trait]
impl PredictClient for LocalPredictClient {
    async fn predict(&self, req: PredictRequest) -> Result<NormalizedCounters, PredictFailure> {
        Ok(self.registry.predict(&req, self.backend.as_deref()).await?.normalized)
    }
}

/// Client for a running prediction server.
pub struct HttpPredictClient {
    base_url: String,
    backend: Option<String>,
    http: reqwest::Client,
}

impl HttpPredictClient {
    pub fn new(
        base_url: impl Into<String>,
        backend: Option<String>,
        timeout: Duration,
    ) -> Result<Self, reqwest::Error> {
        Ok(Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            backend,
            http: reqwest::Client::builder().timeout(timeout).build()?,
        })
    }
}

#[async_trait]
impl PredictClient for HttpPredictClient {
    async fn predict(&self, req: PredictRequest) -> Result<NormalizedCounters, PredictFailure> {
        let mut body = json!({
            "source": req.source,
            "architecture": req.architecture,
            "compiler_flags": req.compiler_flags,
            "request_id": req.request_id,
        });
        if let Some(b) = &self.backend {
            body["backend"] = Value::String(b.clone());
        }
        let resp = self.http.post(format!("{}/v1/predict", self.base_url)).json(&body).send().await.map_err(|e| {
            PredictFailure {
                kind: if e.is_timeout() { "timeout" } else { "backend_unavailable" }.into(),
                message: e.to_string(),
                unavailable: !e.is_timeout(),
            }
        })?;
        let status = resp.status();
        let text = resp.text().await.map_err(|e| PredictFailure {
            kind: "backend_unavailable".into(),
            message: e.to_string(),
            unavailable: true,
        })?;
        if status.is_success() {
            let parsed: PredictResponseBody = serde_json::from_str(&text).map_err(|e| PredictFailure {
                kind: "internal".into(),
                message: format!("unreadable response: {e}"),
                unavailable: false,
            })?;
            return Ok(parsed.normalized);
        }
        let err: Value = serde_json::from_str(&text).unwrap_or(Value::Null);
        let kind = err["error"].as_str().unwrap_or("internal").to_string();
        Err(PredictFailure {
            unavailable: kind == "backend_unavailable",
            message: err["message"].as_str().map_or_else(|| format!("HTTP {status}"), str::to_string),
            kind,
        })
    }
}

/// One test sample prepared for evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalCase {
    pub id: String,
    pub source: String,
    pub architecture: String,
    pub compiler_flags: String,
    pub truth: NormalizedCounters,
}

impl EvalCase {
    /// Reads the request back out of the user turn and the ground truth out
    /// of the assistant turn.
    pub fn from_sample(id: impl Into<String>, sample: &TrainingSample) -> Result<Self, EvalError> {
        let id = id.into();
        let malformed = |message: String| EvalError::Sample { id: id.clone(), message };
        let (architecture, compiler_flags, source) = parse_user_turn(&sample.user)
            .ok_or_else(|| malformed("user turn does not follow the prompt template".into()))?;
        let truth =
            extract_json(&sample.assistant, ExtractMode::Strict).map_err(|e| malformed(e.to_string()))?.counters;
        Ok(EvalCase { id, source, architecture, compiler_flags, truth })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub thresholds: Vec<f64>,
    pub epsilon: f64,
    pub concurrency: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { thresholds: DEFAULT_THRESHOLDS.to_vec(), epsilon: DEFAULT_EPSILON, concurrency: 8 }
    }
}

/// Predicts every case through `client` and scores the results.
pub async fn evaluate(
    client: &dyn PredictClient,
    cases: &[EvalCase],
    config: &EvalConfig,
) -> Result<EvalReport, EvalError> {
    if cases.is_empty() {
        return Err(EvalError::NoSamples);
    }
    let mut outcomes: Vec<(usize, Result<NormalizedCounters, PredictFailure>)> = stream::iter(cases.iter().enumerate())
        .map(|(i, case)| async move {
            let req = PredictRequest {
                source: case.source.clone(),
                architecture: case.architecture.clone(),
                compiler_flags: case.compiler_flags.clone(),
                request_id: i as u64,
            };
            (i, client.predict(req).await)
        })
        .buffer_unordered(config.concurrency.max(1))
        .collect()
        .await;
    outcomes.sort_by_key(|(i, _)| *i);

    if outcomes.iter().all(|(_, r)| matches!(r, Err(f) if f.unavailable)) {
        let msg = outcomes.first().and_then(|(_, r)| r.as_ref().err()).map(|f| f.message.clone()).unwrap_or_default();
        return Err(EvalError::BackendUnavailable(msg));
    }

    let mut pairs = Vec::new();
    let mut failures = std::collections::BTreeMap::<String, usize>::new();
    for (i, outcome) in &outcomes {
        let case = &cases[*i];
        let predicted = match outcome {
            Ok(p) => Some(p),
            Err(f) => {
                *failures.entry(f.kind.clone()).or_default() += 1;
                None
            }
        };
        for (metric, truth) in case.truth.iter() {
            pairs.push(PredictionPair {
                sample: case.id.clone(),
                metric,
                // a prediction missing one metric counts as failed for it
                predicted: predicted.and_then(|p| p.get(metric)),
                truth,
            });
        }
    }
    report_from_pairs(&pairs, cases.len(), failures, config)
}

/// Builds the full report from scored pairs.
pub fn report_from_pairs(
    pairs: &[PredictionPair],
    samples: usize,
    failure_kinds: std::collections::BTreeMap<String, usize>,
    config: &EvalConfig,
) -> Result<EvalReport, EvalError> {
    let rows = threshold_table(pairs, &config.thresholds, config.epsilon)?;
    let unit_edges: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
    let mut histograms = std::collections::BTreeMap::new();
    let mut within_headline = 0usize;
    let mut counted = 0usize;
    let headline_threshold = *config.thresholds.last().expect("validated non-empty");
    for m in Metric::ALL {
        let of_metric: Vec<&PredictionPair> = pairs.iter().filter(|p| p.metric == m).collect();
        if of_metric.is_empty() {
            continue;
        }
        let truths: Vec<f64> = of_metric.iter().map(|p| p.truth.clamp(0.0, 1.0)).collect();
        let errors: Vec<f64> = of_metric
            .iter()
            .filter_map(|p| p.predicted.and_then(|v| super::relative_error(v, p.truth, config.epsilon).ok().flatten()))
            .collect();
        counted += errors.len();
        within_headline += errors.iter().filter(|&&e| e < headline_threshold).count();
        let relative_error = if errors.is_empty() { None } else { Some(histogram(&errors, &Bins::Count(20))?) };
        histograms.insert(
            m.key().to_string(),
            MetricHistograms { truth: histogram(&truths, &Bins::Edges(unit_edges.clone()))?, relative_error },
        );
    }
    let failed_samples = failure_kinds.values().sum();
    Ok(EvalReport {
        thresholds: config.thresholds.clone(),
        epsilon: config.epsilon,
        samples,
        failed_samples,
        failure_kinds,
        rows,
        headline: (counted > 0).then(|| within_headline as f64 / counted as f64),
        histograms,
    })
}
