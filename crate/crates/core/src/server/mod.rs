//! HTTP front end of the predictor registry.
//!
//! `POST /v1/predict`, `GET /v1/backends` and `GET /v1/health`. The server
//! keeps no state of its own beyond the registry; request ids are echoed, and
//! ordering of responses is left to clients.

mod config;

pub use config::{BackendConfig, ConfigError, ServerConfig, ENV_API_KEY, ENV_PORT, ENV_REMOTE_URL};

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::rejection::BytesRejection;
use axum::extract::{DefaultBodyLimit, State};
use axum::http::{HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

use crate::predict::{BackendDescriptor, Health, PredictError, PredictRequest, PredictResponseBody, Registry};

/// Body of `POST /v1/predict`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictBody {
    pub source: String,
    pub architecture: String,
    #[serde(default)]
    pub compiler_flags: String,
    #[serde(default)]
    pub backend: Option<String>,
    pub request_id: u64,
}

/// Body of `GET /v1/health`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthBody {
    /// `ok` when at least one backend is healthy, else `degraded`.
    pub status: String,
    /// Seconds since start.
    pub uptime: f64,
}

/// Error body for every non-200 answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backend: Option<String>,
    /// Backend output that failed extraction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request_id: Option<u64>,
}

struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, kind: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            body: ErrorBody { error: kind.into(), message: message.into(), backend: None, raw: None, request_id: None },
        }
    }

    fn from_predict(e: PredictError, request_id: u64) -> Self {
        let status = match &e {
            PredictError::InvalidRequest(_) | PredictError::UnknownBackend(_) => StatusCode::BAD_REQUEST,
            PredictError::UnsupportedArchitecture { .. }
            | PredictError::UnsupportedSource { .. }
            | PredictError::Extraction { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            PredictError::Unavailable { .. } => StatusCode::SERVICE_UNAVAILABLE,
            PredictError::Timeout { .. } => StatusCode::GATEWAY_TIMEOUT,
            PredictError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let backend = match &e {
            PredictError::UnsupportedArchitecture { backend, .. }
            | PredictError::UnsupportedSource { backend, .. }
            | PredictError::Unavailable { backend, .. }
            | PredictError::Timeout { backend, .. }
            | PredictError::Extraction { backend, .. } => Some(backend.clone()),
            PredictError::UnknownBackend(id) => Some(id.clone()),
            _ => None,
        };
        let raw = match &e {
            PredictError::Extraction { error, .. } => Some(error.raw.clone()),
            _ => None,
        };
        Self {
            status,
            body: ErrorBody {
                error: e.kind().into(),
                message: e.to_string(),
                backend,
                raw,
                request_id: Some(request_id),
            },
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

#[derive(Clone)]
pub struct AppState {
    registry: Arc<Registry>,
    started: Instant,
    max_source_bytes: usize,
}

impl AppState {
    pub fn new(registry: Arc<Registry>, max_source_bytes: usize) -> Self {
        Self { registry, started: Instant::now(), max_source_bytes }
    }
}

/// The API routes with body limit and CORS applied.
pub fn router(state: AppState, cors_origins: &[String]) -> Router {
    // JSON escaping can double a source; leave room for the other fields
    let body_limit = state.max_source_bytes.saturating_mul(2).saturating_add(64 * 1024);
    let mut app = Router::new()
        .route("/v1/predict", post(predict))
        .route("/v1/backends", get(backends))
        .route("/v1/health", get(health))
        .layer(DefaultBodyLimit::max(body_limit))
        .with_state(state);
    if !cors_origins.is_empty() {
        let origin = if cors_origins.iter().any(|o| o == "*") {
            AllowOrigin::from(Any)
        } else {
            AllowOrigin::list(cors_origins.iter().filter_map(|o| HeaderValue::from_str(o).ok()))
        };
        app = app
            .layer(CorsLayer::new().allow_origin(origin).allow_methods([Method::GET, Method::POST]).allow_headers(Any));
    }
    app
}

async fn predict(
    State(state): State<AppState>,
    body: Result<Bytes, BytesRejection>,
) -> Result<Json<PredictResponseBody>, ApiError> {
    let body = body.map_err(|e| {
        let status = e.status();
        let kind = if status == StatusCode::PAYLOAD_TOO_LARGE { "payload_too_large" } else { "invalid_request" };
        ApiError::new(status, kind, e.body_text())
    })?;
    let body: PredictBody = serde_json::from_slice(&body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid_request", format!("malformed body: {e}")))?;
    if body.source.len() > state.max_source_bytes {
        let mut err = ApiError::new(
            StatusCode::PAYLOAD_TOO_LARGE,
            "payload_too_large",
            format!("source is {} bytes, limit {}", body.source.len(), state.max_source_bytes),
        );
        err.body.request_id = Some(body.request_id);
        return Err(err);
    }
    let req = PredictRequest {
        source: body.source,
        architecture: body.architecture,
        compiler_flags: body.compiler_flags,
        request_id: body.request_id,
    };
    match state.registry.predict(&req, body.backend.as_deref()).await {
        Ok(resp) => Ok(Json(PredictResponseBody::from(&resp))),
        Err(e) => {
            tracing::warn!(request_id = req.request_id, kind = e.kind(), "predict failed: {e}");
            Err(ApiError::from_predict(e, req.request_id))
        }
    }
}

async fn backends(State(state): State<AppState>) -> Json<Vec<BackendDescriptor>> {
    Json(state.registry.descriptors().await)
}

async fn health(State(state): State<AppState>) -> Json<Value> {
    let any_healthy = state.registry.descriptors().await.iter().any(|d| d.health == Health::Healthy);
    Json(json!(HealthBody {
        status: if any_healthy { "ok" } else { "degraded" }.into(),
        uptime: state.started.elapsed().as_secs_f64(),
    }))
}

/// Binds `addr` and serves `app` in the background; returns the bound
/// address (useful with port 0).
pub async fn spawn(
    app: Router,
    addr: SocketAddr,
) -> std::io::Result<(SocketAddr, tokio::task::JoinHandle<std::io::Result<()>>)> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    let local = listener.local_addr()?;
    let handle = tokio::spawn(async move { axum::serve(listener, app).await });
    Ok((local, handle))
}

/// Serves `config` until interrupted.
pub async fn run(config: ServerConfig) -> anyhow::Result<()> {
    let registry = Arc::new(config.registry()?);
    let app = router(AppState::new(registry.clone(), config.max_source_bytes), &config.cors_origins);
    let listener = tokio::net::TcpListener::bind((config.host.as_str(), config.port)).await?;
    tracing::info!(addr = %listener.local_addr()?, backends = ?registry.ids(), default = registry.default_id(), "serving");
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
