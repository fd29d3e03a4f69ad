use std::path::Path;

use serde::Serialize;

use super::{BuildConfig, LabeledSample, Origin, ProfileRecord};
use crate::roofline::{MachinePeaks, NormRanges};
use crate::synth::{fingerprint, validate_restricted, GeneratedKernel, OracleModel, SynthError};

#[derive(Debug, Clone, PartialEq, Serialize, thiserror::Error)]
#[error("row {row} ({kernel_id}): {message}")]
pub struct LabelError {
    pub row: usize,
    pub kernel_id: String,
    pub message: String,
}

/// Joins profile records with their source files (`source_path`, relative to
/// `sources_dir`, defaulting to `<kernel_id>.hip`). Records lacking a
/// fingerprint get the structural one of their source.
pub fn label_records(
    records: &[ProfileRecord],
    sources_dir: &Path,
    origin: Origin,
    ranges: &NormRanges,
) -> (Vec<LabeledSample>, Vec<LabelError>) {
    let mut samples = Vec::new();
    let mut errors = Vec::new();
    for r in records {
        let fail = |message: String| LabelError { row: r.row, kernel_id: r.kernel.id.clone(), message };
        let rel = r.kernel.source_path.clone().unwrap_or_else(|| format!("{}.hip", r.kernel.id));
        let source = match std::fs::read_to_string(sources_dir.join(&rel)) {
            Ok(s) => s,
            Err(e) => {
                errors.push(fail(format!("cannot read source {rel}: {e}")));
                continue;
            }
        };
        let metrics = r.metrics();
        if !metrics.is_complete() {
            errors.push(fail(format!("only {} of 12 metrics are defined", metrics.len())));
            continue;
        }
        let counters = match metrics.clamped(ranges) {
            Ok(c) => c,
            Err(e) => {
                errors.push(fail(e.to_string()));
                continue;
            }
        };
        let fp = match &r.kernel.fingerprint {
            Some(fp) => fp.clone(),
            None => {
                let parsed = validate_restricted(&source);
                if let Some(d) = parsed.first_error() {
                    errors.push(fail(format!("no fingerprint given and source does not parse: {d}")));
                    continue;
                }
                fingerprint(&parsed.kernels)
            }
        };
        samples.push(LabeledSample { source, config: r.config.clone(), counters, origin, fingerprint: fp });
    }
    (samples, errors)
}

/// Oracle-labelled sample for `source` (the kernel itself or a renamed
/// variant of it) under `config`.
pub fn label_generated(
    kernel: &GeneratedKernel,
    source: &str,
    config: &BuildConfig,
    model: &OracleModel,
    peaks: &MachinePeaks,
    ranges: &NormRanges,
) -> Result<LabeledSample, SynthError> {
    let counters = model.counters(&kernel.fingerprint, &kernel.metadata, peaks)?.clamped(ranges)?;
    Ok(LabeledSample {
        source: source.to_string(),
        config: config.clone(),
        counters,
        origin: Origin::Oracle,
        fingerprint: kernel.fingerprint.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{KernelRef, RawCounters, RecordCounters};
    use crate::synth::{generate, Dtype, KernelGenSpec};

    fn record(id: &str, l2_requests: f64) -> ProfileRecord {
        ProfileRecord {
            row: 1,
            kernel: KernelRef { id: id.into(), fingerprint: None, source_path: None },
            config: BuildConfig::new("gfx90a", "-O3"),
            counters: RecordCounters::Raw(RawCounters {
                flops: 2e5,
                l1_bytes: 1.6e6,
                l2_bytes: 1.6e6,
                hbm_read_bytes: 8e5,
                hbm_write_bytes: 8e5,
                duration_s: 1e-5,
                l1_requests: 10.0,
                l1_hits: 5.0,
                l2_requests,
                l2_hits: l2_requests / 2.0,
            }),
        }
    }

    #[test]
    fn records_join_sources_and_get_fingerprints() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("add.hip"), include_str!("../../tests/fixtures/grid_stride_add.hip")).unwrap();
        let records = [record("add", 10.0), record("add", 0.0), record("missing", 10.0)];
        let (samples, errors) = label_records(&records, dir.path(), Origin::Custom, &NormRanges::default());
        assert_eq!(samples.len(), 1);
        assert_eq!(samples[0].fingerprint.len(), 32);
        assert_eq!(errors.len(), 2);
        assert!(errors[0].message.contains("11 of 12"));
        assert!(errors[1].message.contains("cannot read"));
    }

    #[test]
    fn generated_kernels_are_oracle_labelled() {
        let k = generate(&KernelGenSpec::minimal(Dtype::Float64, 1 << 20, 3)).unwrap();
        let s = label_generated(
            &k,
            &k.source,
            &BuildConfig::new("gfx942", "-O3"),
            &OracleModel::default(),
            &MachinePeaks::builtin("gfx942").unwrap(),
            &NormRanges::default(),
        )
        .unwrap();
        assert!(s.counters.is_complete());
        assert_eq!(s.origin, Origin::Oracle);
    }
}
