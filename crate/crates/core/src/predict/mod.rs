//! The prediction contract and its backends.
//!
//! Every backend produces assistant text; the [`Registry`] extracts the
//! counter block from it, denormalizes and derives roofline points, so the
//! analytic oracle and a remote model share one validation path.

mod extract;
mod oracle;
mod registry;
mod remote;

pub use extract::{extract_json, ExtractError, ExtractErrorKind, ExtractMode, Extracted};
pub use oracle::OracleBackend;
pub use registry::{Registry, RegistryOptions};
pub use remote::RemoteBackend;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::roofline::{CounterVector, Metric, NormalizedCounters, RooflinePoint};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictRequest {
    pub source: String,
    pub architecture: String,
    pub compiler_flags: String,
    pub request_id: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Oracle,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Health {
    Healthy,
    Unavailable,
}

/// Static facts a backend reports about itself.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackendInfo {
    pub id: String,
    pub kind: BackendKind,
    /// Supported architectures; empty means any.
    pub architectures: Vec<String>,
    /// Whether calls must not overlap.
    pub serialized: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendDescriptor {
    pub id: String,
    pub kind: BackendKind,
    pub capabilities: Vec<String>,
    pub health: Health,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub health_detail: Option<String>,
    pub serialized: bool,
    pub default: bool,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PredictError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("unknown backend `{0}`")]
    UnknownBackend(String),
    #[error("backend {backend} does not support architecture {architecture}")]
    UnsupportedArchitecture { backend: String, architecture: String },
    #[error("backend {backend} cannot predict this source: {message}")]
    UnsupportedSource { backend: String, message: String },
    #[error("backend {backend} unavailable: {message}")]
    Unavailable { backend: String, message: String },
    #[error("backend {backend} did not answer within {timeout_ms} ms")]
    Timeout { backend: String, timeout_ms: u64 },
    #[error("backend {backend} returned malformed counters: {error}")]
    Extraction { backend: String, error: ExtractError },
    #[error("internal error: {0}")]
    Internal(String),
}

impl PredictError {
    /// Stable machine-readable name.
    pub fn kind(&self) -> &'static str {
        match self {
            PredictError::InvalidRequest(_) => "invalid_request",
            PredictError::UnknownBackend(_) => "unknown_backend",
            PredictError::UnsupportedArchitecture { .. } => "unsupported_architecture",
            PredictError::UnsupportedSource { .. } => "unsupported_source",
            PredictError::Unavailable { .. } => "backend_unavailable",
            PredictError::Timeout { .. } => "timeout",
            PredictError::Extraction { error, .. } => error.kind.as_str(),
            PredictError::Internal(_) => "internal",
        }
    }
}

#[async_trait]
pub trait Backend: Send + Sync {
    fn info(&self) -> BackendInfo;

    /// Live probe.
    async fn health(&self) -> Result<(), String>;

    /// Raw assistant text for `req`.
    async fn complete(&self, req: &PredictRequest) -> Result<String, PredictError>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictResponse {
    pub request_id: u64,
    pub backend: String,
    pub latency_ms: f64,
    pub normalized: NormalizedCounters,
    pub physical: CounterVector,
    pub roofline: Vec<RooflinePoint>,
    pub warnings: Vec<String>,
}

/// JSON shape of a prediction on the wire: `physical` maps each metric key
/// to `{value, unit}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictResponseBody {
    pub request_id: u64,
    pub backend: String,
    pub latency_ms: f64,
    pub normalized: NormalizedCounters,
    pub physical: Map<String, Value>,
    pub roofline: Vec<RooflinePoint>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl From<&PredictResponse> for PredictResponseBody {
    fn from(r: &PredictResponse) -> Self {
        let physical = r
            .physical
            .iter()
            .map(|(m, v)| (m.key().to_string(), serde_json::json!({ "value": v, "unit": m.unit().as_str() })))
            .collect();
        Self {
            request_id: r.request_id,
            backend: r.backend.clone(),
            latency_ms: r.latency_ms,
            normalized: r.normalized.clone(),
            physical,
            roofline: r.roofline.clone(),
            warnings: r.warnings.clone(),
        }
    }
}

impl PredictResponseBody {
    /// Physical values as a counter vector.
    pub fn physical_counters(&self) -> Result<CounterVector, String> {
        let mut out = CounterVector::new();
        for (key, v) in &self.physical {
            let metric = Metric::from_key(key).ok_or_else(|| format!("unknown metric `{key}`"))?;
            let value = v.get("value").and_then(Value::as_f64).ok_or_else(|| format!("{key}: missing value"))?;
            out.set(metric, value).map_err(|e| e.to_string())?;
        }
        Ok(out)
    }
}
