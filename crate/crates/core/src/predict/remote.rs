use std::time::Duration;

use async_trait::async_trait;

use super::{Backend, BackendInfo, BackendKind, PredictError, PredictRequest};
use crate::chat::{ChatClient, ChatError, ChatMessage, EndpointConfig};
use crate::prompt::{render_user_turn, PREDICT_SYSTEM_PROMPT};

/// A fine-tuned model behind a chat-completion endpoint.
pub struct RemoteBackend {
    id: String,
    client: ChatClient,
    architectures: Vec<String>,
    temperature: f64,
    serialized: bool,
}

impl RemoteBackend {
    pub fn new(
        id: impl Into<String>,
        endpoint: EndpointConfig,
        architectures: Vec<String>,
        temperature: f64,
        serialized: bool,
    ) -> Result<Self, PredictError> {
        let id = id.into();
        let client = ChatClient::new(endpoint)
            .map_err(|e| PredictError::Unavailable { backend: id.clone(), message: e.to_string() })?;
        Ok(Self { id, client, architectures, temperature, serialized })
    }

    /// The conversation sent for `req`; the user turn is the training one.
    pub fn messages(req: &PredictRequest) -> [ChatMessage; 2] {
        [
            ChatMessage::system(PREDICT_SYSTEM_PROMPT),
            ChatMessage::user(render_user_turn(&req.architecture, &req.compiler_flags, &req.source)),
        ]
    }
}

#[async_trait]
impl Backend for RemoteBackend {
    fn info(&self) -> BackendInfo {
        BackendInfo {
            id: self.id.clone(),
            kind: BackendKind::Remote,
            architectures: self.architectures.clone(),
            serialized: self.serialized,
        }
    }

    /// TCP reachability of the endpoint host.
    async fn health(&self) -> Result<(), String> {
        let url = reqwest::Url::parse(&self.client.config().url).map_err(|e| e.to_string())?;
        let host = url.host_str().ok_or("endpoint URL has no host")?.to_string();
        let port = url.port_or_known_default().ok_or("endpoint URL has no port")?;
        match tokio::time::timeout(Duration::from_millis(500), tokio::net::TcpStream::connect((host.as_str(), port)))
            .await
        {
            Ok(Ok(_)) => Ok(()),
            Ok(Err(e)) => Err(format!("{host}:{port}: {e}")),
            Err(_) => Err(format!("{host}:{port}: connect timed out")),
        }
    }

    async fn complete(&self, req: &PredictRequest) -> Result<String, PredictError> {
        let messages = Self::messages(req);
        match self.client.complete(&messages, self.temperature).await {
            Ok(c) => Ok(c.content),
            Err(ChatError::Timeout { timeout_ms }) => {
                Err(PredictError::Timeout { backend: self.id.clone(), timeout_ms })
            }
            Err(e) => Err(PredictError::Unavailable { backend: self.id.clone(), message: e.to_string() }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chat::mock::{serve, Reply};
    use crate::ingest::{BuildConfig, LabeledSample, Origin};
    use crate::roofline::{CounterVector, Metric, NormRanges};

    fn req() -> PredictRequest {
        PredictRequest {
            source: "__global__ void k(float* a) { a[threadIdx.x] = 1.0f; }\n".into(),
            architecture: "gfx90a".into(),
            compiler_flags: "--std=c++17 -O3 -ffast-math".into(),
            request_id: 4,
        }
    }

    #[test]
    fn user_turn_matches_training_sample() {
        let r = req();
        let counters: CounterVector = Metric::ALL.iter().map(|&m| (m, 0.0)).collect();
        let sample = LabeledSample {
            source: r.source.clone(),
            config: BuildConfig::new(r.architecture.clone(), &r.compiler_flags),
            counters,
            origin: Origin::Custom,
            fingerprint: "f".into(),
        };
        let training = crate::dataset::render_sample(&sample, &NormRanges::default()).unwrap();
        let [system, user] = RemoteBackend::messages(&r);
        assert_eq!(system.content, training.system);
        assert_eq!(user.content, training.user);
    }

    #[tokio::test]
    async fn timeouts_and_outages_map_to_errors() {
        let (url, _) = serve(vec![], Reply::Sleep(2_000)).await;
        let endpoint = EndpointConfig { timeout_ms: 100, ..EndpointConfig::new(url, "m") };
        let b = RemoteBackend::new("remote", endpoint, vec![], 0.0, false).unwrap();
        assert_eq!(
            b.complete(&req()).await.unwrap_err(),
            PredictError::Timeout { backend: "remote".into(), timeout_ms: 100 }
        );
        assert!(b.health().await.is_ok());

        let endpoint =
            EndpointConfig { max_retries: 0, ..EndpointConfig::new("http://127.0.0.1:9/v1/chat/completions", "m") };
        let down = RemoteBackend::new("down", endpoint, vec![], 0.0, false).unwrap();
        assert_eq!(down.complete(&req()).await.unwrap_err().kind(), "backend_unavailable");
        assert!(down.health().await.is_err());
    }
}
