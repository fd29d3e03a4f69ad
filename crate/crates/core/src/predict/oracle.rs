use std::collections::BTreeMap;

use async_trait::async_trait;

use super::{Backend, BackendInfo, BackendKind, PredictError, PredictRequest};
use crate::prompt::render_assistant_turn;
use crate::roofline::{normalize, CounterBlock, MachinePeaks, NormRanges};
use crate::synth::{MetadataStore, OracleModel, SynthError};

/// Answers with the analytic streaming-model counters of generator kernels.
/// Sources without generator metadata are refused.
pub struct OracleBackend {
    id: String,
    store: MetadataStore,
    model: OracleModel,
    peaks: BTreeMap<String, MachinePeaks>,
    ranges: NormRanges,
}

impl OracleBackend {
    pub fn new(
        id: impl Into<String>,
        store: MetadataStore,
        model: OracleModel,
        peaks: impl IntoIterator<Item = MachinePeaks>,
        ranges: NormRanges,
    ) -> Self {
        Self {
            id: id.into(),
            store,
            model,
            peaks: peaks.into_iter().map(|p| (p.architecture.clone(), p)).collect(),
            ranges,
        }
    }

    /// Oracle over the built-in architectures with default settings.
    pub fn with_builtin_peaks(id: impl Into<String>, store: MetadataStore) -> Self {
        let peaks = MachinePeaks::builtin_architectures().iter().filter_map(|a| MachinePeaks::builtin(a));
        Self::new(id, store, OracleModel::default(), peaks, NormRanges::default())
    }

    /// The assistant text the oracle gives for `req`.
    pub fn render(&self, req: &PredictRequest) -> Result<String, PredictError> {
        let peaks = self.peaks.get(&req.architecture).ok_or_else(|| PredictError::UnsupportedArchitecture {
            backend: self.id.clone(),
            architecture: req.architecture.clone(),
        })?;
        let (fp, meta) = self.store.resolve(&req.source).map_err(|e| match e {
            SynthError::OracleUnavailable(message) => {
                PredictError::UnsupportedSource { backend: self.id.clone(), message }
            }
            other => PredictError::Internal(other.to_string()),
        })?;
        let internal = |e: &dyn std::fmt::Display| PredictError::Internal(format!("{}: {e}", self.id));
        let raw = self.model.counters(&fp, &meta, peaks).map_err(|e| internal(&e))?;
        let counters = normalize(&raw, &self.ranges).map_err(|e| internal(&e))?;
        let block = CounterBlock {
            compiler_flags: req.compiler_flags.clone(),
            architecture: req.architecture.clone(),
            counters,
        };
        let json = block.to_json_text().map_err(|e| internal(&e))?;
        Ok(render_assistant_turn(&req.architecture, &req.compiler_flags, &json))
    }
}

#[async_trait]
impl Backend for OracleBackend {
    fn info(&self) -> BackendInfo {
        BackendInfo {
            id: self.id.clone(),
            kind: BackendKind::Oracle,
            architectures: self.peaks.keys().cloned().collect(),
            serialized: false,
        }
    }

    async fn health(&self) -> Result<(), String> {
        Ok(())
    }

    async fn complete(&self, req: &PredictRequest) -> Result<String, PredictError> {
        self.render(req)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predict::{extract_json, ExtractMode};
    use crate::roofline::quantize;
    use crate::synth::{generate, oracle_counters, Dtype, KernelGenSpec};

    #[test]
    fn oracle_text_matches_oracle_counters() {
        let k =
            generate(&KernelGenSpec { num_compute: 40, ..KernelGenSpec::minimal(Dtype::Float32, 1 << 22, 8) }).unwrap();
        let mut store = MetadataStore::new();
        store.insert_kernel(&k);
        let backend = OracleBackend::with_builtin_peaks("oracle", store);
        let req = PredictRequest {
            source: k.source.clone(),
            architecture: "gfx942".into(),
            compiler_flags: "-O3".into(),
            request_id: 1,
        };
        let text = backend.render(&req).unwrap();
        assert_eq!(text, backend.render(&req).unwrap());
        let got = extract_json(&text, ExtractMode::Strict).unwrap();
        let want = normalize(
            &oracle_counters(&k.metadata, &MachinePeaks::builtin("gfx942").unwrap(), 1.0).unwrap(),
            &NormRanges::default(),
        )
        .unwrap();
        for (m, v) in want.iter() {
            assert_eq!(got.counters.get(m), Some(quantize(v)), "{m}");
        }
    }

    #[test]
    fn unknown_code_and_architecture_are_refused() {
        let backend = OracleBackend::with_builtin_peaks("oracle", MetadataStore::new());
        let mut req = PredictRequest {
            source: include_str!("../../tests/fixtures/grid_stride_add.hip").into(),
            architecture: "gfx90a".into(),
            compiler_flags: String::new(),
            request_id: 1,
        };
        assert_eq!(backend.render(&req).unwrap_err().kind(), "unsupported_source");
        req.architecture = "sm_90".into();
        assert_eq!(backend.render(&req).unwrap_err().kind(), "unsupported_architecture");
    }
}
