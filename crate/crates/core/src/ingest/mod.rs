//! Profiler record ingestion, derived-metric computation, configuration
//! expansion and labelled samples.

mod derive;
mod label;
mod read;

pub use derive::{derive_metrics, GIGA};
pub use label::{label_generated, label_records, LabelError};
pub use read::{ingest, ColumnMap, Field, IngestError, IngestResult, RowDiagnostic};

use serde::{Deserialize, Serialize};

use crate::roofline::CounterVector;

/// Toolchain and target a kernel was (or is to be) built for.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BuildConfig {
    pub architecture: String,
    #[serde(default)]
    pub compiler_flags: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub toolkit: Option<String>,
}

impl BuildConfig {
    pub fn new(architecture: impl Into<String>, flags: &str) -> Self {
        Self { architecture: architecture.into(), compiler_flags: split_flags(flags), toolkit: None }
    }

    /// Flags joined with single spaces, as they appear in prompts.
    pub fn flags_string(&self) -> String {
        self.compiler_flags.join(" ")
    }
}

pub fn split_flags(flags: &str) -> Vec<String> {
    flags.split_whitespace().map(str::to_string).collect()
}

/// Low-level counters of one profiled kernel run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawCounters {
    pub flops: f64,
    pub l1_bytes: f64,
    pub l2_bytes: f64,
    pub hbm_read_bytes: f64,
    pub hbm_write_bytes: f64,
    /// Profiler-reported kernel time.
    pub duration_s: f64,
    pub l1_requests: f64,
    pub l1_hits: f64,
    pub l2_requests: f64,
    pub l2_hits: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RecordCounters {
    Raw(RawCounters),
    /// The twelve metrics were supplied directly.
    PreDerived {
        metrics: CounterVector,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelRef {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fingerprint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_path: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRecord {
    /// 1-based data row (CSV) or line (JSONL) number.
    pub row: usize,
    pub kernel: KernelRef,
    pub config: BuildConfig,
    pub counters: RecordCounters,
}

impl ProfileRecord {
    pub fn is_pre_derived(&self) -> bool {
        matches!(self.counters, RecordCounters::PreDerived { .. })
    }

    /// Derived metrics for raw records, the supplied ones otherwise.
    pub fn metrics(&self) -> CounterVector {
        match &self.counters {
            RecordCounters::Raw(raw) => derive_metrics(raw),
            RecordCounters::PreDerived { metrics } => metrics.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Synthetic,
    Ai,
    Custom,
    Oracle,
}

impl Origin {
    pub fn as_str(self) -> &'static str {
        match self {
            Origin::Synthetic => "synthetic",
            Origin::Ai => "ai",
            Origin::Custom => "custom",
            Origin::Oracle => "oracle",
        }
    }
}

impl std::str::FromStr for Origin {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "synthetic" => Ok(Origin::Synthetic),
            "ai" => Ok(Origin::Ai),
            "custom" => Ok(Origin::Custom),
            "oracle" => Ok(Origin::Oracle),
            other => Err(format!("unknown origin `{other}`")),
        }
    }
}

/// Source text paired with its counters for one build configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub source: String,
    pub config: BuildConfig,
    pub counters: CounterVector,
    pub origin: Origin,
    /// Structural fingerprint of the base kernel.
    pub fingerprint: String,
}

/// One kernel to build under one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildJob {
    pub kernel_id: String,
    pub fingerprint: Option<String>,
    pub config: BuildConfig,
}

/// Cartesian product of kernels × flag sets × architectures, kernel-major
/// then flag set then architecture. An empty flag-set list expands as a
/// single empty flag set.
pub fn expand_configs(
    kernels: &[KernelRef],
    flag_sets: &[Vec<String>],
    architectures: &[String],
    toolkit: Option<&str>,
) -> Result<Vec<BuildJob>, IngestError> {
    if architectures.is_empty() {
        return Err(IngestError::Config("at least one architecture is required".into()));
    }
    let empty = [Vec::new()];
    let flag_sets = if flag_sets.is_empty() { &empty[..] } else { flag_sets };
    let mut jobs = Vec::with_capacity(kernels.len() * flag_sets.len() * architectures.len());
    for k in kernels {
        for flags in flag_sets {
            for arch in architectures {
                jobs.push(BuildJob {
                    kernel_id: k.id.clone(),
                    fingerprint: k.fingerprint.clone(),
                    config: BuildConfig {
                        architecture: arch.clone(),
                        compiler_flags: flags.clone(),
                        toolkit: toolkit.map(str::to_string),
                    },
                });
            }
        }
    }
    Ok(jobs)
}
