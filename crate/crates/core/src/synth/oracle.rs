//! Analytic streaming-kernel model that labels generated kernels.
//!
//! Every thread loads and stores its elements exactly once, so the byte
//! traffic is identical at L1, L2 and HBM. Kernel time is the larger of the
//! memory time at the HBM roof and the compute time at the compute roof,
//! both derated by `efficiency`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::generate::{GeneratedKernel, KernelGenSpec, KernelMetadata};
use super::parse::validate_restricted;
use super::{fingerprint, SynthError};
use crate::roofline::{CounterVector, MachinePeaks, MemoryLevel, Metric};

/// Marker of the optional first-line metadata comment.
pub const METADATA_HEADER: &str = "// counterlens-metadata: ";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HitRates {
    /// percent
    pub l1: f64,
    /// percent
    pub l2: f64,
}

/// Hit rates of the streaming model.
///
/// L1 hits are repeated touches of an input line within a thread: with `d`
/// distinct inputs among `loads + stores` accesses, `d` miss and the rest
/// hit. L2 serves the stores' write-allocate lines out of the
/// `distinct inputs + stores` lines it sees. One load and one store of the
/// same index gives 50% at both levels.
pub fn streaming_hit_rates(meta: &KernelMetadata) -> HitRates {
    let accesses = (meta.loads_per_thread + meta.stores_per_thread) as f64;
    let distinct = meta.distinct_inputs_loaded as f64;
    let stores = meta.stores_per_thread as f64;
    HitRates { l1: 100.0 * (1.0 - distinct / accesses), l2: 100.0 * stores / (distinct + stores) }
}

/// Counters of a generator kernel under the streaming model.
pub fn oracle_counters(
    meta: &KernelMetadata,
    peaks: &MachinePeaks,
    efficiency: f64,
) -> Result<CounterVector, SynthError> {
    counters_with_hit_rates(meta, peaks, efficiency, streaming_hit_rates(meta))
}

fn counters_with_hit_rates(
    meta: &KernelMetadata,
    peaks: &MachinePeaks,
    efficiency: f64,
    hit: HitRates,
) -> Result<CounterVector, SynthError> {
    if !(efficiency > 0.0 && efficiency <= 1.0) {
        return Err(SynthError::Oracle(format!("efficiency {efficiency} must be in (0, 1]")));
    }
    peaks.validate()?;
    let threads = meta.total_threads as f64;
    let read = threads * meta.bytes_loaded_per_thread as f64;
    let write = threads * meta.bytes_stored_per_thread as f64;
    let bytes = read + write;
    if bytes <= 0.0 {
        return Err(SynthError::Oracle("kernel moves no bytes".into()));
    }
    let flops = threads * meta.flops_per_thread as f64;

    // GB and GFLOP against GB/s and GFLOP/s: time in seconds
    let memory_time = bytes / 1e9 / (efficiency * peaks.bandwidth_at(MemoryLevel::Hbm)?);
    let compute_time = flops / 1e9 / (efficiency * peaks.peak_gflops);
    let time = memory_time.max(compute_time);

    let ai = flops / bytes;
    let gflops = flops / 1e9 / time;
    let bw = bytes / 1e9 / time;

    let mut c = CounterVector::new();
    for level in MemoryLevel::ALL {
        c.set(level.intensity_metric(), ai)?;
        c.set(level.gflops_metric(), gflops)?;
    }
    c.set(Metric::L1Bandwidth, bw)?;
    c.set(Metric::L2Bandwidth, bw)?;
    c.set(Metric::FabricWriteBandwidth, write / 1e9 / time)?;
    c.set(Metric::FabricReadBandwidth, read / 1e9 / time)?;
    c.set(Metric::L1HitRate, hit.l1)?;
    c.set(Metric::L2HitRate, hit.l2)?;
    Ok(c)
}

/// Oracle settings shared by every labelled kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleModel {
    pub efficiency: f64,
    /// Per-fingerprint hit rates replacing the streaming model.
    #[serde(default)]
    pub hit_rate_overrides: BTreeMap<String, HitRates>,
}

impl Default for OracleModel {
    fn default() -> Self {
        Self { efficiency: 1.0, hit_rate_overrides: BTreeMap::new() }
    }
}

impl OracleModel {
    pub fn counters(
        &self,
        fingerprint: &str,
        meta: &KernelMetadata,
        peaks: &MachinePeaks,
    ) -> Result<CounterVector, SynthError> {
        let hit = self.hit_rate_overrides.get(fingerprint).copied().unwrap_or_else(|| streaming_hit_rates(meta));
        counters_with_hit_rates(meta, peaks, self.efficiency, hit)
    }
}

/// What the generator writes next to each kernel source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub fingerprint: String,
    pub metadata: KernelMetadata,
    pub spec: KernelGenSpec,
}

impl From<&GeneratedKernel> for Sidecar {
    fn from(k: &GeneratedKernel) -> Self {
        Sidecar { fingerprint: k.fingerprint.clone(), metadata: k.metadata.clone(), spec: k.spec.clone() }
    }
}

impl GeneratedKernel {
    /// Source prefixed with a one-line metadata comment.
    pub fn source_with_header(&self) -> String {
        let json = serde_json::to_string(&self.metadata).expect("metadata serializes");
        format!("{METADATA_HEADER}{json}\n{}", self.source)
    }
}

/// Metadata from a leading header comment, if present.
pub fn embedded_metadata(source: &str) -> Option<Result<KernelMetadata, SynthError>> {
    let first = source.lines().next()?;
    let json = first.strip_prefix(METADATA_HEADER)?;
    Some(
        serde_json::from_str(json)
            .map_err(|e| SynthError::Metadata { path: "<header>".into(), message: e.to_string() }),
    )
}

/// Generator metadata keyed by structural fingerprint, so renamed variants
/// of a kernel resolve to the same entry.
#[derive(Debug, Clone, Default)]
pub struct MetadataStore {
    entries: BTreeMap<String, KernelMetadata>,
}

impl MetadataStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, fingerprint: impl Into<String>, meta: KernelMetadata) {
        self.entries.insert(fingerprint.into(), meta);
    }

    pub fn insert_kernel(&mut self, k: &GeneratedKernel) {
        self.insert(k.fingerprint.clone(), k.metadata.clone());
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, fingerprint: &str) -> Option<&KernelMetadata> {
        self.entries.get(fingerprint)
    }

    /// Reads every `*.meta.json` sidecar under `dir` (non-recursive).
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self, SynthError> {
        let dir = dir.as_ref();
        let io = |e: std::io::Error| SynthError::Io { path: dir.display().to_string(), source: e };
        let mut store = Self::new();
        let mut paths: Vec<_> = std::fs::read_dir(dir)
            .map_err(io)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.to_string_lossy().ends_with(".meta.json"))
            .collect();
        paths.sort();
        for path in paths {
            let text = std::fs::read_to_string(&path)
                .map_err(|e| SynthError::Io { path: path.display().to_string(), source: e })?;
            let sidecar: Sidecar = serde_json::from_str(&text)
                .map_err(|e| SynthError::Metadata { path: path.display().to_string(), message: e.to_string() })?;
            store.insert(sidecar.fingerprint, sidecar.metadata);
        }
        Ok(store)
    }

    /// Metadata for `source`: its header comment first, then the store by
    /// fingerprint. Returns the fingerprint alongside.
    pub fn resolve(&self, source: &str) -> Result<(String, KernelMetadata), SynthError> {
        let parsed = validate_restricted(source);
        if let Some(d) = parsed.first_error() {
            return Err(SynthError::OracleUnavailable(format!("source does not parse: {d}")));
        }
        let fp = fingerprint(&parsed.kernels);
        if let Some(meta) = embedded_metadata(source) {
            return Ok((fp, meta?));
        }
        match self.entries.get(&fp) {
            Some(meta) => Ok((fp, meta.clone())),
            None => Err(SynthError::OracleUnavailable(format!(
                "no generator metadata for fingerprint {fp}; the oracle only labels generated kernels"
            ))),
        }
    }
}
