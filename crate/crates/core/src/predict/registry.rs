use std::collections::HashMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use parking_lot::RwLock;

use super::{
    extract_json, Backend, BackendDescriptor, ExtractMode, Health, PredictError, PredictRequest, PredictResponse,
};
use crate::ingest::split_flags;
use crate::roofline::{denormalize, NormRanges, RooflinePoint};

#[derive(Debug, Clone)]
pub struct RegistryOptions {
    pub ranges: NormRanges,
    pub mode: ExtractMode,
    /// Budget per predict call, including waiting for a serialized backend.
    pub timeout: Duration,
    /// How long a health probe result is reused.
    pub health_ttl: Duration,
}

impl Default for RegistryOptions {
    fn default() -> Self {
        Self {
            ranges: NormRanges::default(),
            mode: ExtractMode::Strict,
            timeout: Duration::from_secs(30),
            health_ttl: Duration::from_secs(5),
        }
    }
}

struct Entry {
    backend: Arc<dyn Backend>,
    /// Present for backends that declared serialized access.
    queue: Option<tokio::sync::Mutex<()>>,
}

/// Last probe outcome and when it was taken.
type HealthEntry = (Result<(), String>, Instant);

/// Backends by id, with a default and a shared health cache.
pub struct Registry {
    entries: Vec<Entry>,
    default_id: String,
    options: RegistryOptions,
    health: RwLock<HashMap<String, HealthEntry>>,
}

impl Registry {
    /// The first backend is the default unless `default_id` names another.
    pub fn new(
        backends: Vec<Arc<dyn Backend>>,
        default_id: Option<&str>,
        options: RegistryOptions,
    ) -> Result<Self, PredictError> {
        let mut seen = std::collections::HashSet::new();
        for b in &backends {
            if !seen.insert(b.info().id) {
                return Err(PredictError::InvalidRequest(format!("duplicate backend id `{}`", b.info().id)));
            }
        }
        let first = backends.first().ok_or_else(|| PredictError::InvalidRequest("no backends configured".into()))?;
        let default_id = match default_id {
            Some(id) if seen.contains(id) => id.to_string(),
            Some(id) => return Err(PredictError::UnknownBackend(id.to_string())),
            None => first.info().id,
        };
        let entries = backends
            .into_iter()
            .map(|backend| {
                let queue = backend.info().serialized.then(|| tokio::sync::Mutex::new(()));
                Entry { backend, queue }
            })
            .collect();
        Ok(Self { entries, default_id, options, health: RwLock::new(HashMap::new()) })
    }

    pub fn default_id(&self) -> &str {
        &self.default_id
    }

    pub fn options(&self) -> &RegistryOptions {
        &self.options
    }

    pub fn ids(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.backend.info().id).collect()
    }

    fn entry(&self, id: Option<&str>) -> Result<&Entry, PredictError> {
        let id = id.unwrap_or(&self.default_id);
        self.entries
            .iter()
            .find(|e| e.backend.info().id == id)
            .ok_or_else(|| PredictError::UnknownBackend(id.to_string()))
    }

    async fn probe(&self, entry: &Entry) -> Result<(), String> {
        let id = entry.backend.info().id;
        if let Some((r, at)) = self.health.read().get(&id) {
            if at.elapsed() < self.options.health_ttl {
                return r.clone();
            }
        }
        let r = entry.backend.health().await;
        self.health.write().insert(id, (r.clone(), Instant::now()));
        r
    }

    fn mark(&self, id: &str, r: Result<(), String>) {
        self.health.write().insert(id.to_string(), (r, Instant::now()));
    }

    /// Descriptors with current (possibly cached) health.
    pub async fn descriptors(&self) -> Vec<BackendDescriptor> {
        let mut out = Vec::with_capacity(self.entries.len());
        for e in &self.entries {
            let info = e.backend.info();
            let health = self.probe(e).await;
            out.push(BackendDescriptor {
                default: info.id == self.default_id,
                id: info.id,
                kind: info.kind,
                capabilities: info.architectures,
                health: if health.is_ok() { Health::Healthy } else { Health::Unavailable },
                health_detail: health.err(),
                serialized: info.serialized,
            });
        }
        out
    }

    pub async fn predict(&self, req: &PredictRequest, backend: Option<&str>) -> Result<PredictResponse, PredictError> {
        if req.source.trim().is_empty() {
            return Err(PredictError::InvalidRequest("source is empty".into()));
        }
        if req.architecture.trim().is_empty() {
            return Err(PredictError::InvalidRequest("architecture is empty".into()));
        }
        let entry = self.entry(backend)?;
        let info = entry.backend.info();
        if !info.architectures.is_empty() && !info.architectures.contains(&req.architecture) {
            return Err(PredictError::UnsupportedArchitecture {
                backend: info.id,
                architecture: req.architecture.clone(),
            });
        }

        let call = async {
            let _turn = match &entry.queue {
                Some(q) => Some(q.lock().await),
                None => None,
            };
            let started = Instant::now();
            let r = entry.backend.complete(req).await;
            (r, started.elapsed())
        };
        let (raw, elapsed) = match tokio::time::timeout(self.options.timeout, call).await {
            Ok((Ok(raw), elapsed)) => (raw, elapsed),
            Ok((Err(e), _)) => {
                if matches!(e, PredictError::Unavailable { .. } | PredictError::Timeout { .. }) {
                    self.mark(&info.id, Err(e.to_string()));
                }
                return Err(e);
            }
            Err(_) => {
                let timeout_ms = self.options.timeout.as_millis() as u64;
                return Err(PredictError::Timeout { backend: info.id, timeout_ms });
            }
        };

        let extracted = extract_json(&raw, self.options.mode)
            .map_err(|error| PredictError::Extraction { backend: info.id.clone(), error })?;
        let mut warnings = Vec::new();
        if let Some(arch) = &extracted.architecture {
            if arch.trim() != req.architecture.trim() {
                warnings.push(format!("architecture echo `{arch}` differs from request `{}`", req.architecture));
            }
        }
        if let Some(flags) = &extracted.compiler_flags {
            let mut got = split_flags(flags);
            let mut want = split_flags(&req.compiler_flags);
            got.sort();
            want.sort();
            if got != want {
                warnings.push(format!("compiler_flags echo `{flags}` differs from request `{}`", req.compiler_flags));
            }
        }
        let physical = denormalize(&extracted.counters, &self.options.ranges)
            .map_err(|e| PredictError::Internal(e.to_string()))?;
        Ok(PredictResponse {
            request_id: req.request_id,
            backend: info.id,
            latency_ms: elapsed.as_secs_f64() * 1000.0,
            roofline: RooflinePoint::from_counters(&physical),
            normalized: extracted.counters,
            physical,
            warnings,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predict::{BackendInfo, BackendKind, ExtractErrorKind};
    use crate::prompt::render_assistant_turn;
    use async_trait::async_trait;
    use std::sync::atomic::{AtomicUsize, Ordering};

    const FIG3_BLOCK: &str = "{\n\n\"compiler_flags\": \"--std=c++17 -O3 -ffast-math\",\n\"architecture\": \"gfx90a\",\n\"L1_Cache_Arithmetic_Intensity\": \"0.002\",\n\"L2_Cache_Arithmetic_Intensity\": \"0.002\",\n\"HBM_Arithmetic_Intensity\": \"0.004\",\n\"L1_Cache_GFLOPS\": \"0.459\",\n\"L2_Cache_GFLOPS\": \"0.459\",\n\"HBM_GFLOPS\": \"0.459\",\n\"L1_Cache_Bandwidth\": \"0.089\",\n\"L2_Cache_Bandwidth\": \"0.070\",\n\"L2_Fabric_Write_BW\": \"0.022\",\n\"L2_Fabric_Read_BW\": \"0.022\",\n\"L1_Cache_Hit_Rate\": \"0.500\",\n\"L2_Cache_Hit_Rate\": \"0.370\"\n}";

    /// Replies with a fixed text, optionally after a delay, counting overlap.
    struct Canned {
        id: &'static str,
        text: String,
        delay_ms: u64,
        serialized: bool,
        active: AtomicUsize,
        max_active: AtomicUsize,
    }

    impl Canned {
        fn new(id: &'static str, text: String) -> Self {
            Self {
                id,
                text,
                delay_ms: 0,
                serialized: false,
                active: AtomicUsize::new(0),
                max_active: AtomicUsize::new(0),
            }
        }
    }

    #[async_trait]
    impl Backend for Canned {
        fn info(&self) -> BackendInfo {
            BackendInfo {
                id: self.id.into(),
                kind: BackendKind::Remote,
                architectures: vec![],
                serialized: self.serialized,
            }
        }
        async fn health(&self) -> Result<(), String> {
            Ok(())
        }
        async fn complete(&self, _req: &PredictRequest) -> Result<String, PredictError> {
            let now = self.active.fetch_add(1, Ordering::SeqCst) + 1;
            self.max_active.fetch_max(now, Ordering::SeqCst);
            tokio::time::sleep(Duration::from_millis(self.delay_ms)).await;
            self.active.fetch_sub(1, Ordering::SeqCst);
            Ok(self.text.clone())
        }
    }

    fn req(id: u64) -> PredictRequest {
        PredictRequest {
            source: "__global__ void k() {}".into(),
            architecture: "gfx90a".into(),
            compiler_flags: "-ffast-math --std=c++17 -O3".into(),
            request_id: id,
        }
    }

    fn fig3() -> String {
        render_assistant_turn("gfx90a", "--std=c++17 -O3 -ffast-math", FIG3_BLOCK)
    }

    #[tokio::test]
    async fn reference_answer_becomes_response() {
        let reg = Registry::new(vec![Arc::new(Canned::new("m", fig3()))], None, RegistryOptions::default()).unwrap();
        let r = reg.predict(&req(9), None).await.unwrap();
        assert_eq!(r.request_id, 9);
        assert_eq!(r.backend, "m");
        assert!((r.physical.get(crate::roofline::Metric::L2HitRate).unwrap() - 37.0).abs() < 1e-9);
        assert_eq!(r.roofline.len(), 3);
        assert!(r.warnings.is_empty(), "reordered flags are not a mismatch: {:?}", r.warnings);
    }

    #[tokio::test]
    async fn echo_mismatch_warns_and_garbage_fails_with_raw_text() {
        let reg = Registry::new(
            vec![
                Arc::new(Canned::new("echo", fig3().replace("\"gfx90a\"", "\"gfx942\""))),
                Arc::new(Canned::new("junk", "no idea".into())),
            ],
            Some("echo"),
            RegistryOptions::default(),
        )
        .unwrap();
        let r = reg.predict(&req(1), None).await.unwrap();
        assert_eq!(r.warnings.len(), 1);
        match reg.predict(&req(2), Some("junk")).await.unwrap_err() {
            PredictError::Extraction { error, .. } => {
                assert_eq!(error.kind, ExtractErrorKind::NoBlock);
                assert_eq!(error.raw, "no idea");
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(reg.predict(&req(3), Some("nope")).await, Err(PredictError::UnknownBackend(_))));
    }

    #[tokio::test]
    async fn serialized_backends_never_overlap_and_timeouts_fire() {
        let mut slow = Canned::new("slow", fig3());
        slow.delay_ms = 20;
        slow.serialized = true;
        let slow = Arc::new(slow);
        let reg = Arc::new(Registry::new(vec![slow.clone()], None, RegistryOptions::default()).unwrap());
        let calls: Vec<_> = (0..5)
            .map(|i| {
                let reg = reg.clone();
                tokio::spawn(async move { reg.predict(&req(i), None).await.unwrap().request_id })
            })
            .collect();
        for (i, c) in calls.into_iter().enumerate() {
            assert_eq!(c.await.unwrap(), i as u64);
        }
        assert_eq!(slow.max_active.load(Ordering::SeqCst), 1);

        let mut stuck = Canned::new("stuck", fig3());
        stuck.delay_ms = 5_000;
        let opts = RegistryOptions { timeout: Duration::from_millis(50), ..Default::default() };
        let reg = Registry::new(vec![Arc::new(stuck)], None, opts).unwrap();
        assert!(matches!(reg.predict(&req(1), None).await, Err(PredictError::Timeout { timeout_ms: 50, .. })));
    }

    #[tokio::test]
    async fn descriptors_and_validation() {
        let reg = Registry::new(vec![Arc::new(Canned::new("a", fig3()))], None, RegistryOptions::default()).unwrap();
        let d = reg.descriptors().await;
        assert_eq!(d.len(), 1);
        assert!(d[0].default);
        assert_eq!(d[0].health, Health::Healthy);
        let mut empty = req(1);
        empty.source = "  ".into();
        assert!(matches!(reg.predict(&empty, None).await, Err(PredictError::InvalidRequest(_))));
        assert!(Registry::new(vec![], None, RegistryOptions::default()).is_err());
    }
}
