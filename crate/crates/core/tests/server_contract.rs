use std::net::SocketAddr;
use std::sync::Arc;

use counterlens::chat::EndpointConfig;
use counterlens::predict::{Backend, OracleBackend, Registry, RegistryOptions, RemoteBackend};
use counterlens::server::{router, spawn, AppState, ErrorBody, HealthBody};
use counterlens::synth::{generate, Dtype, KernelGenSpec, MetadataStore};
use serde_json::{json, Value};

fn dead_endpoint() -> EndpointConfig {
    // nothing listens on the discard port in the sandbox
    EndpointConfig {
        url: "http://127.0.0.1:9/v1/chat/completions".into(),
        model: "m".into(),
        api_key: None,
        timeout_ms: 500,
        max_retries: 0,
        backoff_ms: 1,
    }
}

async fn serve(backends: Vec<Arc<dyn Backend>>, default: Option<&str>, max_source: usize) -> SocketAddr {
    let registry = Registry::new(backends, default, RegistryOptions::default()).unwrap();
    let app = router(AppState::new(Arc::new(registry), max_source), &["*".to_string()]);
    spawn(app, "127.0.0.1:0".parse().unwrap()).await.unwrap().0
}

fn kernel() -> counterlens::synth::GeneratedKernel {
    let spec = KernelGenSpec { num_loads: 3, num_compute: 5, ..KernelGenSpec::minimal(Dtype::Float64, 1 << 20, 3) };
    generate(&spec).unwrap()
}

async fn oracle_server(max_source: usize) -> (SocketAddr, String) {
    let k = kernel();
    let mut store = MetadataStore::new();
    store.insert_kernel(&k);
    let oracle: Arc<dyn Backend> = Arc::new(OracleBackend::with_builtin_peaks("oracle", store));
    (serve(vec![oracle], None, max_source).await, k.source)
}

async fn post(addr: SocketAddr, body: Value) -> (u16, Value) {
    let resp = reqwest::Client::new().post(format!("http://{addr}/v1/predict")).json(&body).send().await.unwrap();
    let status = resp.status().as_u16();
    (status, resp.json().await.unwrap())
}

#[tokio::test]
async fn predict_returns_complete_body() {
    let (addr, source) = oracle_server(1 << 20).await;
    let (status, body) =
        post(addr, json!({"source": source, "architecture": "gfx942", "compiler_flags": "-O3", "request_id": 17}))
            .await;
    assert_eq!(status, 200, "{body}");
    assert_eq!(body["request_id"], 17);
    assert_eq!(body["backend"], "oracle");
    assert_eq!(body["normalized"].as_object().unwrap().len(), 12);
    assert_eq!(body["physical"]["L1_Cache_Hit_Rate"]["unit"], "%");
    assert_eq!(body["roofline"].as_array().unwrap().len(), 3);
}

#[tokio::test]
async fn missing_source_is_400() {
    let (addr, _) = oracle_server(1 << 20).await;
    let (status, body) = post(addr, json!({"architecture": "gfx942", "request_id": 1})).await;
    assert_eq!(status, 400);
    let err: ErrorBody = serde_json::from_value(body).unwrap();
    assert_eq!(err.error, "invalid_request");
}

#[tokio::test]
async fn oversize_source_is_413() {
    let (addr, _) = oracle_server(1024).await;
    let (status, body) =
        post(addr, json!({"source": "x".repeat(2048), "architecture": "gfx942", "request_id": 2})).await;
    assert_eq!(status, 413);
    assert_eq!(body["error"], "payload_too_large");
    assert_eq!(body["request_id"], 2);
}

#[tokio::test]
async fn unknown_kernel_and_architecture_are_422() {
    let (addr, source) = oracle_server(1 << 20).await;
    let (status, body) =
        post(addr, json!({"source": "__global__ void k() {}", "architecture": "gfx942", "request_id": 3})).await;
    assert_eq!(status, 422, "{body}");
    assert_eq!(body["backend"], "oracle");
    let (status, _) = post(addr, json!({"source": source, "architecture": "sm_90", "request_id": 4})).await;
    assert_eq!(status, 422);
}

#[tokio::test]
async fn unknown_backend_is_400() {
    let (addr, source) = oracle_server(1 << 20).await;
    let (status, body) =
        post(addr, json!({"source": source, "architecture": "gfx942", "backend": "nope", "request_id": 5})).await;
    assert_eq!(status, 400);
    assert_eq!(body["error"], "unknown_backend");
}

#[tokio::test]
async fn dead_remote_is_503_and_degraded() {
    let remote: Arc<dyn Backend> = Arc::new(RemoteBackend::new("model", dead_endpoint(), vec![], 0.0, false).unwrap());
    let addr = serve(vec![remote], None, 1 << 20).await;
    let (status, body) =
        post(addr, json!({"source": "__global__ void k() {}", "architecture": "gfx942", "request_id": 6})).await;
    assert_eq!(status, 503, "{body}");
    assert_eq!(body["backend"], "model");

    let health: HealthBody = reqwest::get(format!("http://{addr}/v1/health")).await.unwrap().json().await.unwrap();
    assert_eq!(health.status, "degraded");
    let list: Value = reqwest::get(format!("http://{addr}/v1/backends")).await.unwrap().json().await.unwrap();
    assert_eq!(list[0]["id"], "model");
    assert_eq!(list[0]["health"], "unavailable");
}

#[tokio::test]
async fn backends_list_marks_default() {
    let k = kernel();
    let mut store = MetadataStore::new();
    store.insert_kernel(&k);
    let oracle: Arc<dyn Backend> = Arc::new(OracleBackend::with_builtin_peaks("oracle", store));
    let remote: Arc<dyn Backend> =
        Arc::new(RemoteBackend::new("model", dead_endpoint(), vec!["gfx90a".into()], 0.0, true).unwrap());
    let addr = serve(vec![oracle, remote], Some("oracle"), 1 << 20).await;
    let list: Value = reqwest::get(format!("http://{addr}/v1/backends")).await.unwrap().json().await.unwrap();
    let list = list.as_array().unwrap();
    assert_eq!(list.len(), 2);
    assert_eq!(list[0]["default"], true);
    assert_eq!(list[1]["default"], false);
    assert_eq!(list[1]["serialized"], true);
    assert_eq!(list[1]["capabilities"], json!(["gfx90a"]));
    let health: HealthBody = reqwest::get(format!("http://{addr}/v1/health")).await.unwrap().json().await.unwrap();
    assert_eq!(health.status, "ok");
}

#[tokio::test]
async fn cors_preflight_is_answered() {
    let (addr, _) = oracle_server(1 << 20).await;
    let resp = reqwest::Client::new()
        .request(reqwest::Method::OPTIONS, format!("http://{addr}/v1/predict"))
        .header("Origin", "http://localhost:5173")
        .header("Access-Control-Request-Method", "POST")
        .send()
        .await
        .unwrap();
    assert!(resp.status().is_success());
    assert_eq!(resp.headers()["access-control-allow-origin"], "*");
}
